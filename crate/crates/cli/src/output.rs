//! Output directory handling: one run per directory at a time, enforced by
//! a `.lock` file created exclusively and removed on drop.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub struct OutputDir {
    root: PathBuf,
    lock: PathBuf,
    log: Vec<String>,
}

impl OutputDir {
    pub fn open(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("creating {}: {e}", root.display())))?;
        let lock = root.join(".lock");
        OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::Io(format!("output directory {} is locked by another run", root.display()))
            } else {
                CliError::Io(format!("locking {}: {e}", root.display()))
            }
        })?;
        Ok(Self { root: root.to_owned(), lock, log: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))?;
        Ok(BufWriter::new(file))
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }

    /// Appends a line to `run.log`, the only output that may vary between
    /// identical runs (timings).
    pub fn log(&mut self, line: String) {
        self.log.push(line);
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.log.is_empty() {
            if let Ok(mut f) = File::create(self.root.join("run.log")) {
                for line in &self.log {
                    let _ = writeln!(f, "{line}");
                }
            }
        }
        let _ = fs::remove_file(&self.lock);
    }
}
