use clap::Parser;
use tkey::cli::{self, Cli, Env};
use tkey::clock::SystemClock;

fn main() {
    let args = Cli::parse();
    let home = args.home.clone().unwrap_or_else(cli::default_home);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut env = Env { home, clock: &SystemClock, out: &mut out };
    if let Err(f) = cli::run(args, &mut env) {
        eprintln!("tkey: {}", f.message);
        std::process::exit(f.code);
    }
}
