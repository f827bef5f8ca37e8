use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::OsRng;
use serde_json::json;
use tkey_core::bits::Bits;
use tkey_core::chain::{Params, SlotTime};
use tkey_core::checkpoint::{expected_cost, LoginModel, PlanConfig, Scheme, SolverConfig};
use tkey_core::encoding::{
    base32_to_password, enrollment_to_uri, password_to_base32, password_to_words, phrase_to_password, WordList,
};
use tkey_core::prover::{ProverError, ProverState};
use tkey_core::verifier::{CredentialStore, SkewPolicy, Verifier, VerifyError};
use tkey_sim::attacks::{attack_independent, attack_same_function, AttackConfig};
use tkey_sim::lemmas::{mc_collision_prob, mc_image_size, mc_preimage_stats};
use tkey_sim::logins::{simulate_logins, LoginSimConfig};
use tkey_sim::StatReport;

use crate::bench::{self, BenchConfig};
use crate::clock::{Clock, SystemClock};
use crate::results::{self, ResultRecord};
use crate::service::{self, RateLimit, Service};
use crate::store::LogStore;

#[derive(Debug, Parser)]
#[command(name = "tkey", version, about = "One-time passwords from time-tagged hash chains")]
pub struct Cli {
    /// State directory for default file locations.
    #[arg(long, env = "TKEY_HOME", global = true)]
    pub home: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a new chain and print its enrollment URI.
    Enroll(EnrollArgs),
    /// Print the password for the current slot.
    Otp(OtpArgs),
    /// Check a password against a credential store.
    Verify(VerifyArgs),
    /// Run the HTTP verification service.
    Serve(ServeArgs),
    /// Monte-Carlo experiments.
    Simulate {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Setup, generation and verification costs at full chain lengths.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Naive,
    Recursive,
    Optimal,
    Mixed,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Naive => Scheme::Naive,
            SchemeArg::Recursive => Scheme::Recursive,
            SchemeArg::Optimal => Scheme::ExpectationOptimal,
            SchemeArg::Mixed => Scheme::Mixed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Stored checkpoints.
    #[arg(long, default_value_t = 20)]
    pub checkpoints: usize,
    /// Equally spaced checkpoints within the mixed scheme.
    #[arg(long, default_value_t = 8)]
    pub worst: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Mixed)]
    pub scheme: SchemeArg,
    /// Expected logins per slot.
    #[arg(long, default_value_t = 1.0 / 20160.0)]
    pub lambda: f64,
}

impl PlanArgs {
    fn plan(&self) -> Result<PlanConfig, String> {
        let plan = PlanConfig {
            scheme: self.scheme.into(),
            q_total: self.checkpoints,
            q_worst: self.worst.min(self.checkpoints),
            model: LoginModel::exponential(self.lambda).map_err(|e| e.to_string())?,
            solver: SolverConfig::default(),
        };
        plan.validate().map_err(|e| e.to_string())?;
        Ok(plan)
    }
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    /// Prover state file. Default: $TKEY_HOME/prover.state
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Chain length in slots.
    #[arg(long, default_value_t = 2_000_000)]
    pub chain_length: u64,
    #[arg(long, default_value_t = 30)]
    pub slot_seconds: u64,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Start slot instead of the current one.
    #[arg(long)]
    pub at: Option<u64>,
    /// Overwrite an existing state file.
    #[arg(long)]
    pub force: bool,
    /// Also register the chain in the credential store under this id.
    #[arg(long)]
    pub cred_id: Option<String>,
    /// Credential store. Default: $TKEY_HOME/credentials.log
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OtpArgs {
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Slot instead of the current one.
    #[arg(long)]
    pub at: Option<u64>,
    /// Print hash counts.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Past slots tried besides the current one.
    #[arg(long, default_value_t = 2)]
    pub window: u64,
    /// Accept the chain head at any time after expiry.
    #[arg(long)]
    pub head_grace: bool,
}

impl PolicyArgs {
    fn policy(&self) -> SkewPolicy {
        SkewPolicy { w_back: self.window, accept_head_after_expiry: self.head_grace }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub cred_id: String,
    /// Base32 password, or the words separated by spaces.
    #[arg(long)]
    pub otp: String,
    /// Server slot instead of the current one.
    #[arg(long)]
    pub at: Option<u64>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8733")]
    pub bind: String,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Verification attempts per credential per minute.
    #[arg(long)]
    pub rate_limit: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct SimCommon {
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Results file. Default: $TKEY_HOME/results.jsonl
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Image size, collision and preimage statistics of composed random functions.
    Lemmas {
        #[arg(long = "N", default_value_t = 1 << 16)]
        n: u32,
        /// One chain length for all three statistics instead of 256/128/64.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: SimCommon,
    },
    /// Inversion attacks on same-function and independent-function chains.
    Attacks {
        #[arg(long = "N", default_value_t = 1 << 20)]
        n: u32,
        #[arg(long, default_value_t = 64)]
        k: usize,
        /// Query budgets.
        #[arg(long = "T", value_delimiter = ',', default_values_t = [4096u64, 8192])]
        t: Vec<u64>,
        #[command(flatten)]
        common: SimCommon,
    },
    /// Checkpoint schemes under Poisson logins.
    Checkpoints {
        #[arg(long, default_value_t = 1_050_000)]
        chain_length: u64,
        #[arg(long, default_value_t = 1.0 / 20160.0)]
        lambda: f64,
        /// Checkpoint counts.
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 15, 20, 25])]
        q: Vec<usize>,
        /// Equally spaced checkpoints in the mixed scheme. Default: 2q/5.
        #[arg(long)]
        worst: Option<usize>,
        #[command(flatten)]
        common: SimCommon,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Chain lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64 << 20, 1 << 21, 1 << 22])]
    pub k: Vec<u64>,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Poisson logins replayed per chain length.
    #[arg(long, default_value_t = 10)]
    pub logins: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub results: Option<PathBuf>,
}

/// A failed command: message and process exit code.
#[derive(Debug)]
pub struct Failure {
    pub message: String,
    pub code: i32,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Failure { message: message.to_string(), code: 2 }
    }

    fn rejected(message: impl ToString) -> Self {
        Failure { message: message.to_string(), code: 1 }
    }
}

pub struct Env<'a> {
    pub home: PathBuf,
    pub clock: &'a dyn Clock,
    pub out: &'a mut dyn Write,
}

impl Env<'_> {
    fn path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.home.join(default))
    }
}

pub fn default_home() -> PathBuf {
    std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")).join(".tkey")
}

/// Writes a file by renaming a synced temporary over it.
fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::File::open(dir)?.sync_all()?;
    }
    Ok(())
}

fn load_state(path: &Path) -> Result<ProverState, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    ProverState::from_bytes(&bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn save_state(path: &Path, state: &ProverState) -> Result<(), Failure> {
    write_atomically(path, &state.to_bytes()).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn open_store(path: &Path) -> Result<LogStore, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::usage(e.to_string()))?;
    }
    LogStore::open(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

macro_rules! say {
    ($env:expr, $($arg:tt)*) => {
        writeln!($env.out, $($arg)*).map_err(|e| Failure::usage(e.to_string()))?
    };
}

pub fn run(cli: Cli, env: &mut Env<'_>) -> Result<(), Failure> {
    match cli.command {
        Command::Enroll(a) => enroll(a, env),
        Command::Otp(a) => otp(a, env),
        Command::Verify(a) => verify(a, env),
        Command::Serve(a) => serve(a, env),
        Command::Simulate { experiment } => simulate(experiment, env),
        Command::Bench(a) => bench_cmd(a, env),
    }
}

fn enroll(a: EnrollArgs, env: &mut Env<'_>) -> Result<(), Failure> {
    let state_path = env.path(&a.state, "prover.state");
    if state_path.exists() && !a.force {
        return Err(Failure::usage(format!("{} exists; pass --force to replace it", state_path.display())));
    }
    let params = Params { k: a.chain_length, slot_seconds: a.slot_seconds, ..Params::default() };
    params.validate().map_err(Failure::usage)?;
    let plan = a.plan.plan().map_err(Failure::usage)?;
    let now = a.at.map(SlotTime).unwrap_or_else(|| env.clock.slot(&params));
    let (state, enrollment) = ProverState::init(params, plan, &mut OsRng, now).map_err(Failure::usage)?;
    save_state(&state_path, &state)?;
    let uri = enrollment_to_uri(&enrollment).map_err(Failure::usage)?;
    say!(env, "{uri}");
    if let Some(id) = &a.cred_id {
        let store = open_store(&env.path(&a.store, "credentials.log"))?;
        Verifier::new(store, SkewPolicy::default()).enroll(id, &enrollment, a.force).map_err(Failure::usage)?;
        say!(env, "registered {id}: slots {} to {}", enrollment.t_init().0, enrollment.t_max().0);
    }
    Ok(())
}

fn otp(a: OtpArgs, env: &mut Env<'_>) -> Result<(), Failure> {
    let path = env.path(&a.state, "prover.state");
    let mut state = load_state(&path)?;
    let now = a.at.map(SlotTime).unwrap_or_else(|| env.clock.slot(state.params()));
    let generated = state.gen_password(now).map_err(|e| match e {
        ProverError::Expired { .. } | ProverError::NotYetValid { .. } | ProverError::AlreadyEmitted { .. } => {
            Failure::rejected(e)
        }
        other => Failure::usage(other),
    })?;
    // Record the emission before showing the password.
    save_state(&path, &state)?;
    let p = &generated.password.value;
    let b32 = password_to_base32(p);
    let words = password_to_words(p, &WordList::skey().map_err(Failure::usage)?).join(" ");
    say!(env, "otp     {b32}");
    say!(env, "words   {words}");
    say!(env, "slot    {}", now.0);
    say!(env, "payload tkey://otp?v=1&t={}&p={b32}", now.0);
    if a.verbose {
        say!(env, "hashes  {} (from slot {})", generated.hashes, generated.from.0);
    }
    let replan = state.reposition(now).map_err(Failure::usage)?;
    save_state(&path, &state)?;
    if a.verbose {
        say!(env, "replan  {replan} hashes, {} checkpoints", state.checkpoints().len());
    }
    Ok(())
}

fn parse_password(otp: &str, n: usize) -> Result<Bits, Failure> {
    if otp.split_whitespace().count() > 1 {
        let list = WordList::skey().map_err(Failure::usage)?;
        phrase_to_password(otp, &list, n).map_err(Failure::usage)
    } else {
        base32_to_password(otp.trim(), n).map_err(Failure::usage)
    }
}

fn verify(a: VerifyArgs, env: &mut Env<'_>) -> Result<(), Failure> {
    let store = open_store(&env.path(&a.store, "credentials.log"))?;
    let cred = store
        .get(&a.cred_id)
        .map_err(Failure::usage)?
        .ok_or_else(|| Failure::usage(format!("unknown credential {}", a.cred_id)))?;
    let p = parse_password(&a.otp, cred.params.n)?;
    let now = a.at.map(SlotTime).unwrap_or_else(|| env.clock.slot(&cred.params));
    let verifier = Verifier::new(store, a.policy.policy());
    match verifier.verify(&a.cred_id, &p, now) {
        Ok(acc) => {
            say!(env, "accepted slot {} ({} hashes)", acc.slot.0, acc.hashes);
            Ok(())
        }
        Err(VerifyError::Rejected(r)) => Err(Failure::rejected(format!("rejected: {r}"))),
        Err(e) => Err(Failure::usage(e)),
    }
}

fn serve(a: ServeArgs, env: &mut Env<'_>) -> Result<(), Failure> {
    let store = open_store(&env.path(&a.store, "credentials.log"))?;
    let mut svc = Service::new(Verifier::new(store, a.policy.policy()), Arc::new(SystemClock));
    if let Some(n) = a.rate_limit {
        svc = svc.with_rate_limit(RateLimit::per_minute(n));
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(Failure::usage)?;
    runtime.block_on(service::serve(Arc::new(svc), &a.bind)).map_err(Failure::usage)
}

fn fmt_report(r: &StatReport) -> String {
    format!("{:>12.6} ± {:<10.6} ref {:>12.6}  z {:>6.2}", r.estimate, r.std_error, r.reference, r.z_score())
}

fn record_results(env: &mut Env<'_>, given: &Option<PathBuf>, records: &[ResultRecord]) -> Result<(), Failure> {
    let path = env.path(given, "results.jsonl");
    results::append(&path, records).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    say!(env, "results appended to {}", path.display());
    Ok(())
}

fn simulate(e: Experiment, env: &mut Env<'_>) -> Result<(), Failure> {
    match e {
        Experiment::Lemmas { n, k, common } => {
            let trials = common.trials.unwrap_or(200);
            let seed = common.seed;
            let mut records = Vec::new();
            let (ki, kc, kp) = k.map_or((256, 128, 64), |k| (k, k, k));
            say!(env, "{:<18} {:>8} {:>5} {:>7}  estimate", "statistic", "N", "k", "trials");

            let r = mc_image_size(n, ki, trials, seed).map_err(Failure::usage)?;
            say!(env, "{:<18} {n:>8} {ki:>5} {trials:>7}  {}", "image size", fmt_report(&r));
            records.push(ResultRecord::new("image_size", json!({"N": n, "k": ki, "trials": trials, "seed": seed}), r, Some(r.within(3.0))));

            let r = mc_collision_prob(n, kc, trials, seed).map_err(Failure::usage)?;
            say!(env, "{:<18} {n:>8} {kc:>5} {trials:>7}  {}", "collision", fmt_report(&r));
            records.push(ResultRecord::new("collision", json!({"N": n, "k": kc, "trials": trials, "seed": seed}), r, Some(r.within(3.0))));

            let p = mc_preimage_stats(n, kp, trials, seed, &[0.5, 0.1]).map_err(Failure::usage)?;
            let cfg = json!({"N": n, "k": kp, "trials": trials, "seed": seed});
            say!(env, "{:<18} {n:>8} {kp:>5} {trials:>7}  {}", "preimage mean", fmt_report(&p.mean));
            records.push(ResultRecord::new("preimage_mean", &cfg, p.mean, Some(p.mean.within(3.0))));
            say!(env, "{:<18} {n:>8} {kp:>5} {trials:>7}  {}", "preimage variance", fmt_report(&p.variance));
            records.push(ResultRecord::new("preimage_variance", &cfg, p.variance, Some(p.variance.at_most_reference(3.0))));
            for t in &p.tails {
                say!(env, "{:<18} {n:>8} {kp:>5} {trials:>7}  {}", format!("tail eps={}", t.epsilon), fmt_report(&t.report));
                records.push(ResultRecord::new("preimage_tail", &cfg, t, Some(t.report.at_most_reference(3.0))));
            }
            record_results(env, &common.results, &records)
        }
        Experiment::Attacks { n, k, t, common } => {
            let trials = common.trials.unwrap_or(1000);
            let mut records = Vec::new();
            say!(env, "{:<16} {:>8} {:>4} {:>6} {:>7}  success", "attack", "N", "k", "T", "trials");
            for &budget in &t {
                let cfg = AttackConfig { n, k, budget, trials, seed: common.seed };
                let same = attack_same_function(&cfg).map_err(Failure::usage)?;
                let indep = attack_independent(&cfg).map_err(Failure::usage)?;
                say!(env, "{:<16} {n:>8} {k:>4} {budget:>6} {trials:>7}  {}", "same function", fmt_report(&same.success));
                say!(env, "{:<16} {n:>8} {k:>4} {budget:>6} {trials:>7}  {}", "independent", fmt_report(&indep.success));
                let ratio = same.success.estimate / indep.success.estimate;
                say!(env, "{:<16} {:>38.1}{}", "ratio", ratio, if same.in_regime { "" } else { "  (outside the same-function regime)" });
                records.push(ResultRecord::new("attack_same_function", cfg, same, Some(same.success.at_least_reference(3.0))));
                records.push(ResultRecord::new("attack_independent", cfg, indep, Some(indep.success.at_most_reference(3.0))));
            }
            record_results(env, &common.results, &records)
        }
        Experiment::Checkpoints { chain_length, lambda, q, worst, common } => {
            let model = LoginModel::exponential(lambda).map_err(Failure::usage)?;
            let sessions = common.trials.unwrap_or(200);
            let mut records = Vec::new();
            say!(env, "{:>3} {:<20} {:>12} {:>12} {:>10} {:>12}", "q", "scheme", "analytic", "mean", "max", "replan/login");
            for &q_total in &q {
                let q_worst = worst.unwrap_or(2 * q_total / 5).min(q_total);
                let cfg = LoginSimConfig {
                    ell: chain_length,
                    model,
                    q_total,
                    q_worst,
                    sessions,
                    seed: common.seed,
                    solver: SolverConfig::default(),
                };
                let costs = simulate_logins(&cfg, &Scheme::ALL).map_err(Failure::usage)?;
                for c in &costs {
                    let plan = PlanConfig { scheme: c.scheme, q_total, q_worst, model, solver: cfg.solver };
                    let analytic = expected_cost(&plan.plan(chain_length).map_err(Failure::usage)?, &model);
                    say!(
                        env,
                        "{q_total:>3} {:<20} {analytic:>12.1} {:>12.1} {:>10} {:>12.1}",
                        c.scheme.to_string(),
                        c.mean_cost,
                        c.max_cost,
                        c.mean_reposition
                    );
                    records.push(ResultRecord::new(
                        "checkpoint_sessions",
                        json!({"ell": chain_length, "lambda": lambda, "q": q_total, "q_worst": q_worst, "sessions": sessions, "seed": common.seed}),
                        json!({"scheme": c.scheme, "analytic": analytic, "mean": c.mean_cost, "max": c.max_cost, "logins": c.logins, "replan_per_login": c.mean_reposition}),
                        None,
                    ));
                }
            }
            record_results(env, &common.results, &records)
        }
    }
}

fn bench_cmd(a: BenchArgs, env: &mut Env<'_>) -> Result<(), Failure> {
    let plan = a.plan.plan().map_err(Failure::usage)?;
    let mut records = Vec::new();
    say!(
        env,
        "{:>8} {:>9} {:>8} {:>8} {:>9} {:>9} {:>10} {:>9} {:>9} {:>9}",
        "k", "setup", "setup s", "max gap", "worst", "worst s", "mean", "mean s", "verify", "verify s"
    );
    for &k in &a.k {
        let cfg = BenchConfig { k, plan, logins: a.logins, seed: a.seed, t_init: 56_000_000 };
        let row = bench::run(&cfg).map_err(Failure::usage)?;
        say!(
            env,
            "{:>8} {:>9} {:>8.3} {:>8} {:>9} {:>9.4} {:>10.1} {:>9.4} {:>9} {:>9.3}",
            row.k,
            row.setup_hashes,
            row.setup_secs,
            row.max_gap,
            row.worst_hashes,
            row.worst_secs,
            row.mean_hashes,
            row.mean_secs,
            row.verify_hashes,
            row.verify_secs
        );
        records.push(ResultRecord::new("bench", cfg, &row, Some(row.setup_hashes == k && row.verify_hashes == k)));
    }
    record_results(env, &a.results, &records)
}
