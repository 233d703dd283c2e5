//! Output directory resolution and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::report::CliResult;
use crate::run::Artifact;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_VAR: &str = "DECOHERENCE_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "decoherence-out";

/// Command line flag, then the scenario's `output.dir`, then
/// [`OUTPUT_DIR_VAR`], then [`DEFAULT_OUTPUT_DIR`].
pub fn resolve_dir(flag: Option<&Path>, scenario: Option<&Path>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = scenario {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_VAR) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

/// Writes each artifact to a temporary file in `dir` and renames it into
/// place, so a reader never sees a truncated file.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    for artifact in artifacts {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&artifact.bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(dir.join(&artifact.name)).map_err(|e| e.error)?;
    }
    Ok(())
}
