pub mod algorithm;
pub mod benchmarks;
pub mod delay;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod netenv;
pub mod problem;

pub use error::{Error, Result};
