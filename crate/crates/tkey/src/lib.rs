//! Operational shell around the chain scheme: a durable credential store,
//! an HTTP verification service, benchmarks and the `tkey` command line.

pub mod bench;
pub mod cli;
pub mod clock;
pub mod results;
pub mod service;
pub mod store;
