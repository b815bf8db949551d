//! Shared fixture loading for the benchmarks.

use std::path::PathBuf;

use recourse_core::Dataset;

/// Loads a dataset document from the workspace `configs/` directory.
pub fn fixture(name: &str) -> Dataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    Dataset::load(&path).unwrap_or_else(|e| panic!("loading {}: {e}", path.display()))
}
