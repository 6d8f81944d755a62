//! Camera-based heart rate, heart-rate variability and stress estimation
//! from per-frame skin colour.

pub mod biometrics;
pub mod error;
pub mod eval;
pub mod extract;
pub mod ibi;
pub mod io;
pub mod metrics;
pub mod monitor;
pub mod peaks;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
