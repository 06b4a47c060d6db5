//! Run directories: every file is written to a temporary sibling and renamed
//! into place, and `manifest.json` is written last.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("EICIC_GIT_DESCRIBE"));

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(RunDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes `name` atomically through `fill`.
    pub fn write<F>(&self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<&mut NamedTempFile>) -> Result<(), CliError>,
    {
        let target = self.root.join(name);
        let mut tmp = NamedTempFile::new_in(&self.root).map_err(|e| CliError::io(&target, e))?;
        {
            let mut w = BufWriter::new(&mut tmp);
            fill(&mut w)?;
            w.flush().map_err(|e| CliError::io(&target, e))?;
        }
        tmp.as_file()
            .sync_all()
            .map_err(|e| CliError::io(&target, e))?;
        tmp.persist(&target)
            .map_err(|e| CliError::io(&target, e.error))?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n").map_err(|e| CliError::io(name, e))
        })
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| {
            w.write_all(text.as_bytes())
                .map_err(|e| CliError::io(name, e))
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub version: &'static str,
    pub subcommand: &'a str,
    pub config_path: Option<String>,
    pub seed: u64,
    pub output_dir: String,
    pub options: serde_json::Value,
}

impl Manifest<'_> {
    pub fn write(&self, dir: &RunDir) -> Result<(), CliError> {
        dir.write_json("manifest.json", self)
    }
}
