//! Configuration, orchestration, manifests and SVG figures behind the
//! `detrendcorr` command.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod render;
pub mod svg;

pub use config::RunConfig;
pub use manifest::{Artifact, ArtifactKind, Manifest};
pub use pipeline::{run_pipeline, PipelineError};

/// Caps the worker pool; `None` leaves the default (one per core).
pub fn init_threads(jobs: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = jobs {
        anyhow::ensure!(n > 0, "--jobs must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
