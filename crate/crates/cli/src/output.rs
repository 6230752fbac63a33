//! Output directory handling and config-stamped CSV files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rlsfi::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::config_error;

pub struct Output {
    dir: PathBuf,
    hash: String,
}

/// SHA-256 of the compact JSON of `value`.
pub fn config_hash(value: &impl Serialize) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Output {
    pub fn create(dir: &Path, hash: String) -> rlsfi::Result<Self> {
        fs::create_dir_all(dir).map_err(|e| {
            config_error(format!(
                "cannot create output directory {}: {e}",
                dir.display()
            ))
        })?;
        Ok(Output {
            dir: dir.to_path_buf(),
            hash,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `name` with a `# config_hash=` line followed by whatever `body`
    /// emits (which starts with the header row).
    pub fn csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> rlsfi::Result<PathBuf> {
        let path = self.path(name);
        let io_err = |e| Error::Io {
            path: path.clone(),
            source: e,
        };
        let file = fs::File::create(&path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# config_hash={}", self.hash).map_err(io_err)?;
        body(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
        Ok(path)
    }
}
