//! Cause-effect inference between two continuous variables under
//! skew-normal location-scale noise models.

pub mod cli;
pub mod config;
pub mod datagen;
pub mod distributions;
pub mod ecm;
pub mod error;
pub mod evaluation;
pub mod hsic;
pub mod inference;
pub mod io;
pub mod likelihood;
mod linalg;
pub mod optim;
pub mod seed;
pub mod splines;

pub use config::{EstimationConfig, Profile};
pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod test_support;
