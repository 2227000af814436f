pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod pcm;
pub mod power;
pub mod regress;
pub mod rng;
pub mod sim;
pub mod spline;
pub mod split;
pub mod stats;

pub use error::{Error, Result};
