//! Experiment harness for structured iterative hard thresholding on the
//! inverse source problem: configuration, runners and CSV/SVG output.

pub mod coherence_report;
pub mod config;
pub mod error;
pub mod masked;
pub mod offgrid;
pub mod output;
pub mod success;
pub mod toy;

use std::path::Path;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{ExpError, ExpResult};
pub use output::{Artifacts, Table};

pub(crate) fn ensure_dir(dir: &Path) -> ExpResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub(crate) fn real(v: f64) -> siht::Complex64 {
    siht::Complex64::new(v, 0.0)
}
