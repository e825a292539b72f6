//! Output-file plumbing: every artifact is written to a temp file in the
//! target directory and renamed into place, so readers never see partial
//! output.

use std::path::{Path, PathBuf};

use uwrap_core::Result;

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp"))
}

/// Runs `write` against a temp path, then renames the result onto `path`.
/// The temp file lives in the same directory, so the rename is atomic.
pub fn atomic_write_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = temp_path(path);
    match write(&tmp) {
        Ok(()) => {
            std::fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    atomic_write_with(path, |tmp| Ok(std::fs::write(tmp, contents)?))
}
