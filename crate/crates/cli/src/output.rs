//! Output directory with overwrite protection and a hash manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Usage;

pub struct OutDir {
    root: PathBuf,
    force: bool,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    seed: u64,
    /// Relative path to lower-case hex SHA-256.
    files: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path, force: bool) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf(), force })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Fails with a usage error if any of `rels` exists and `--force` is off.
    pub fn guard(&self, rels: &[&str]) -> Result<()> {
        for rel in rels {
            self.check(rel)?;
        }
        Ok(())
    }

    fn check(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if p.exists() && !self.force {
            return Err(Usage(format!("refusing to overwrite {} (pass --force)", p.display())).into());
        }
        Ok(p)
    }

    pub fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.check(rel)?;
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    /// Writes `manifest.json` covering every other file under the root.
    pub fn write_manifest(&self, command: &str, seed: u64) -> Result<()> {
        let mut files = BTreeMap::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                    continue;
                }
                let rel = p.strip_prefix(&self.root)?.to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" {
                    files.insert(rel, sha256_hex(&std::fs::read(&p)?));
                }
            }
        }
        let manifest = Manifest { command: command.into(), version: crate::config::VERSION.into(), seed, files };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(self.path("manifest.json"), text)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
