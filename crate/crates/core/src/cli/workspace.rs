//! Run directory: one subdirectory per command, a lock file, and the manifest.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".lock";

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub commands: BTreeMap<String, CommandRecord>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub config_hash: String,
    /// Input path → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the run root → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

/// Exclusive handle on a run root, released on drop.
pub struct RunDir {
    root: PathBuf,
    lock: PathBuf,
    manifest: Manifest,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunDir {
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let lock = root.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Config(format!(
                    "{} is locked by another run; remove {} if that run is gone",
                    root.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(Error::io(&lock, e)),
        }
        let path = root.join(MANIFEST);
        let manifest = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_else(|e| {
                log::warn!("ignoring unreadable manifest {}: {e}", path.display());
                Manifest::default()
            }),
            Err(_) => Manifest::default(),
        };
        Ok(Self {
            root: root.to_path_buf(),
            lock,
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path of an artifact that an earlier command must have written.
    pub fn require(&self, command: &str, file: &str) -> Result<PathBuf> {
        let path = self.root.join(command).join(file);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::MissingArtifact {
                path,
                command: command.to_string(),
            })
        }
    }

    pub fn exists(&self, command: &str, file: &str) -> bool {
        self.root.join(command).join(file).is_file()
    }

    /// Starts a command's outputs afresh, clearing what an earlier run left.
    pub fn stage(&self, command: &str) -> Result<Stage<'_>> {
        let dir = self.root.join(command);
        if dir.is_dir() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(Stage {
            dir,
            run: self,
            record: CommandRecord::default(),
            name: command.to_string(),
        })
    }

    fn save_manifest(&mut self) -> Result<()> {
        self.manifest.version = env!("CARGO_PKG_VERSION").to_string();
        let path = self.root.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    pub fn commit(&mut self, stage: StageRecord) -> Result<()> {
        self.manifest.commands.insert(stage.name, stage.record);
        self.save_manifest()
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Outputs of one command, recorded into the manifest on commit.
pub struct Stage<'a> {
    dir: PathBuf,
    run: &'a RunDir,
    record: CommandRecord,
    name: String,
}

pub struct StageRecord {
    name: String,
    record: CommandRecord,
}

impl Stage<'_> {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let hash = sha256_file(path)?;
        self.record.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    pub fn write(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(file);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        let rel = path.strip_prefix(&self.run.root).unwrap_or(&path).display().to_string();
        self.record.outputs.insert(rel, hex::encode(Sha256::digest(bytes)));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(file, &bytes)
    }

    pub fn finish(self, config_hash: &str) -> StageRecord {
        let mut record = self.record;
        record.config_hash = config_hash.to_string();
        StageRecord {
            name: self.name,
            record,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_open_is_rejected_until_drop() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunDir::open(dir.path()).unwrap();
        assert!(RunDir::open(dir.path()).is_err());
        drop(a);
        assert!(RunDir::open(dir.path()).is_ok());
    }

    #[test]
    fn missing_artifact_names_command() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::open(dir.path()).unwrap();
        let e = run.require("build-panel", "r_tao.csv").unwrap_err();
        assert!(e.to_string().contains("run `build-panel` first"));
    }

    #[test]
    fn manifest_records_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::open(dir.path()).unwrap();
        let mut stage = run.stage("stats").unwrap();
        stage.write("a.csv", b"x\n").unwrap();
        let rec = stage.finish("cfg");
        run.commit(rec).unwrap();
        let m: Manifest = serde_json::from_slice(&fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
        let r = &m.commands["stats"];
        assert_eq!(r.config_hash, "cfg");
        assert_eq!(r.outputs.len(), 1);
        assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    }
}
