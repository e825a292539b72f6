//! Library surface of the `uwrap` binary: configuration, the command
//! implementations, and the output plumbing. The binary in `main.rs` is a
//! thin argument-parsing shell over this.

use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod fsio;
pub mod svg;

use config::{wrapper_file_name, RunConfig};

/// One resolved invocation: the parsed config plus the directory all
/// relative paths resolve against (the config file's directory, unless
/// overridden with --out).
pub struct Ctx {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Ctx {
    pub fn new(config: RunConfig, base: PathBuf) -> Ctx {
        Ctx { config, base }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.base.join(&self.config.paths.data_dir)
    }

    pub fn models_dir(&self) -> PathBuf {
        self.base.join(&self.config.paths.models_dir)
    }

    pub fn wrappers_dir(&self) -> PathBuf {
        self.base.join(&self.config.paths.wrappers_dir)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.base.join(&self.config.paths.reports_dir)
    }

    pub fn split_path(&self, split: &str) -> PathBuf {
        self.data_dir().join(format!("{split}.csv"))
    }

    pub fn ddm_path(&self, cell_type: &str) -> PathBuf {
        self.models_dir().join(format!("ddm_{cell_type}.json"))
    }

    pub fn wrapper_path(&self, cell_type: &str, variant: &str) -> PathBuf {
        self.wrappers_dir().join(wrapper_file_name(cell_type, variant))
    }
}

/// Base directory for a config at `config_path`: its parent, or "." when the
/// path has none.
pub fn default_base(config_path: &Path) -> PathBuf {
    match config_path.parent() {
        Some(p) if p.as_os_str().is_empty() => PathBuf::from("."),
        Some(p) => p.to_path_buf(),
        None => PathBuf::from("."),
    }
}
