//! Imputation of missing GPS mobility data and daily mobility measures.

pub mod analytic;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod imputer;
pub mod io;
pub mod kernels;
pub mod projection;
pub mod segmentation;

pub use error::{Error, Result};
