//! Output directory handling; every CSV starts with a provenance comment line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::CliResult;

pub struct Output {
    dir: PathBuf,
    header: String,
}

impl Output {
    pub fn new(dir: &Path, config: &Config) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            header: format!("# yamabe {} config-sha256={}", env!("CARGO_PKG_VERSION"), config_hash(config)),
        })
    }

    /// Creates `name`, writes the comment line and hands the writer to `body`.
    pub fn csv<F>(&self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut dyn Write) -> CliResult<()>,
    {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(w, "{}", self.header)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn binary<F>(&self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut dyn Write) -> CliResult<()>,
    {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// SHA-256 of the effective configuration, after command-line overrides.
pub fn config_hash(config: &Config) -> String {
    let canonical = serde_json::to_string(config).expect("configuration serializes");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
