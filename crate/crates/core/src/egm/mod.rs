//! Unipolar electrograms from transmembrane potential frames.

pub mod array;
pub mod grid;
pub mod kernel;

pub use array::{record_grid, EgmArray, EgmManifest, EgmRecorder};
pub use grid::{ElectrodeGrid, DEFAULT_SIGMA_E};
pub use kernel::{gradient, phi_e_at, EgmKernel};
