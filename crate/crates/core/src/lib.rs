pub mod augment;
pub mod checkpoint;
pub mod error;
pub mod features;
pub mod harness;
pub mod models;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
