pub mod broadening;
pub mod constants;
pub mod demod;
pub mod error;
pub mod fir;
pub mod lattice;
pub mod physics;
pub mod reflection;
pub mod spectrum;
pub mod synthesis;
pub mod transfer;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
