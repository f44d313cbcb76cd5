//! Stochastic dual dynamic programming for multistage stochastic linear
//! programs whose number of stages is random.

pub mod cli;
pub mod cuts;
pub mod engine;
pub mod eval;
pub mod lp;
pub mod oracle;
pub mod portfolio;
pub mod scenario;
