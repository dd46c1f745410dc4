//! Interactive task learning from demonstrations and correctness feedback.

pub mod agent;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod how;
pub mod model;
pub mod tutor;
pub mod when_learning;
pub mod where_learning;

pub use error::{Error, Result};
pub use model::*;
