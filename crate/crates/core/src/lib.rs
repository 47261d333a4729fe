pub mod approximator;
pub mod artifacts;
pub mod env;
pub mod eval;
pub mod hipt;
pub mod math;
pub mod policy;
pub mod population;
pub mod rl_core;
pub mod scripted;
