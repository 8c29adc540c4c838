//! Asynchronous stochastic gradient Langevin dynamics: delayed-gradient
//! simulation, threaded executors, sampling-quality metrics and step-size
//! theory.

pub mod error;
pub mod exec;
pub mod harness;
pub mod langevin;
pub mod metrics;
pub mod potentials;
pub mod record;
pub mod rng;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
