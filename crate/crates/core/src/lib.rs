//! Synthetic cardiac substrates, monodomain action-potential simulation,
//! unipolar contact electrograms, supervised dataset assembly, and the
//! statistics used to judge inverse-model predictions.

pub mod dataset;
pub mod egm;
pub mod ep;
pub mod error;
pub mod inverse;
pub mod io;
pub mod stats;
pub mod substrate;

pub use error::{Error, Result};
