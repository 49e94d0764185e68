pub mod channel;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod federate;
pub mod geometry;
pub mod learn;
pub mod mac;
pub mod report;
pub mod rng;

pub use error::{FlccError, Result};
