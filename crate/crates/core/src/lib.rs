//! Deterministic enumeration, execution and analysis of tabular
//! classification pipelines.

mod ident;

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod error;
pub mod executor;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod search_space;
pub mod transform;

pub use error::{Error, Result};
