//! Calibrated sequential selection among ordered Gaussian estimates.

pub mod bench;
pub mod calibrate;
pub mod config;
pub mod diagnose;
pub mod error;
pub mod family;
pub mod io;
pub mod linalg;
pub mod numeric;
pub mod oracle;
pub mod parallel;
pub mod rng;
pub mod select;

pub use error::{Error, Result};
