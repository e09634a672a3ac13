//! Multiphase mean curvature flow with independent surface tensions and
//! mobilities, simulated by a two-Gaussian thresholding scheme on the periodic
//! unit torus, with diagnostics that check each step against the scheme's
//! minimizing-movement structure.

pub mod config;
pub mod convolution;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod io;
pub mod field;
pub mod kernel;
pub mod oracle;
pub mod presets;
pub mod probes;
pub mod runner;
pub mod scheme;

pub use error::{Error, Result};
