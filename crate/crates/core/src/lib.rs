pub mod baselines;
pub mod contour;
pub mod decondition;
pub mod error;
pub mod methods;
pub mod model;
pub mod operators;
pub mod oracle;
pub mod pipeline;
pub mod qlen;
pub mod rt_solver;
pub mod simulator;
pub mod sparse;
pub mod talbot;

pub use error::{Error, Result};
pub use model::{utilization, ModelParams};
