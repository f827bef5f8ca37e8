pub mod bits;
pub mod chain;
pub mod checkpoint;
pub mod encoding;
pub mod lambert;
pub mod prover;
pub mod verifier;
