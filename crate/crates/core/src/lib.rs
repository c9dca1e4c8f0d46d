//! Numerical toolkit for escaping sets of meromorphic functions whose poles
//! grow at a prescribed rate.

pub mod atlas;
pub mod catalog;
pub mod dimension;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod pipeline;
pub mod tolerances;
pub mod verifier;

pub use error::{Error, ErrorKind, Result};

/// Size the global worker pool; `None` keeps the machine default.
pub fn configure_threads(jobs: Option<usize>) -> Result<()> {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(Error::invalid("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid(format!("thread pool already configured: {e}")))
}
