//! Citation-count forecasting.
//!
//! Given a paper's yearly citations `c_0..=c_k`, predict `c_{k+1}..=c_n`.
//! The main predictor ([`model`]) is a sequence-to-sequence recurrent network
//! trained with teacher forcing; [`baselines`] holds the MEY, AVR and GMM
//! comparison methods and [`metrics`] the RMSE / R² evaluation.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod par;

pub use error::{Error, Result};
