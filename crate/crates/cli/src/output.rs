use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::CliError;

/// Output directory handle; every file is written to a temporary sibling and
/// renamed into place, so a partial file never carries the final name.
pub struct OutDir {
    dir: PathBuf,
    quiet: bool,
}

impl OutDir {
    pub fn create(dir: &Path, quiet: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), quiet })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write<F>(&self, name: &str, fill: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), String>,
    {
        let target = self.path(name);
        let fail = |e: String| CliError::Runtime(format!("writing {}: {e}", target.display()));
        let tmp = NamedTempFile::new_in(&self.dir).map_err(|e| fail(e.to_string()))?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            fill(&mut w).map_err(fail)?;
            w.flush().map_err(|e| fail(e.to_string()))?;
        }
        tmp.as_file().sync_all().map_err(|e| fail(e.to_string()))?;
        tmp.persist(&target).map_err(|e| fail(e.error.to_string()))?;
        self.note(format_args!("wrote {}", target.display()));
        Ok(target)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        self.write(name, |w| w.write_all(text.as_bytes()).map_err(|e| e.to_string()))
    }

    pub fn note(&self, msg: std::fmt::Arguments<'_>) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}
