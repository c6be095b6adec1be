//! Batch driver for the blowup experiments: manifest parsing, run
//! orchestration and versioned CSV/JSON export.

pub mod manifest;
pub mod run;
pub mod table;

use std::path::{Path, PathBuf};

pub use manifest::{Command, Manifest, ManifestError};
pub use run::{run, Summary};

/// Environment variable that overrides the manifest's output directory.
pub const OUTPUT_DIR_ENV: &str = "YMBLOW_OUTPUT_DIR";

/// Output directory by precedence: explicit flag, environment, manifest.
pub fn resolve_output_dir(flag: Option<&Path>, env: Option<&str>, manifest: &Manifest) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| manifest.output_dir.clone())
}
