pub mod classifier;
pub mod dataset;
pub mod error;
pub mod events;
pub mod exec;
pub mod experiment;
pub mod hpo;
pub mod neuron;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use exec::Exec;
