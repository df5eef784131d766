//! All-or-nothing output directories: files are written to a sibling
//! staging directory and renamed into place on success.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

pub struct Staged {
    target: PathBuf,
    staging: PathBuf,
    force: bool,
    committed: bool,
}

impl Staged {
    /// Fails before any work is done if `target` exists and `force` is off.
    pub fn new(target: &Path, force: bool) -> Result<Self, CliError> {
        if target.exists() && !force {
            return Err(CliError::Usage(format!(
                "{} already exists; pass --force to overwrite",
                target.display()
            )));
        }
        let name = target
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("invalid output path {}", target.display())))?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(wavegate::Error::from)?;
        let staging = parent.join(format!(".{}.staging-{}", name.to_string_lossy(), std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(wavegate::Error::from)?;
        }
        fs::create_dir(&staging).map_err(wavegate::Error::from)?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            force,
            committed: false,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.staging.join(file)
    }

    pub fn commit(mut self) -> Result<PathBuf, CliError> {
        if self.target.exists() {
            if !self.force {
                return Err(CliError::Usage(format!("{} appeared while running", self.target.display())));
            }
            if self.target.is_dir() {
                fs::remove_dir_all(&self.target).map_err(wavegate::Error::from)?;
            } else {
                fs::remove_file(&self.target).map_err(wavegate::Error::from)?;
            }
        }
        fs::rename(&self.staging, &self.target).map_err(wavegate::Error::from)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
