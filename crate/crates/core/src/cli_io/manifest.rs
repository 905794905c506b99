//! Run manifests and field directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::ScalarField;

use super::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    /// Human-readable bound, e.g. `<= 5e-3`.
    pub bound: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub steps: u64,
    pub derived: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    /// Identifiers of the properties exercised by the run.
    pub claims: Vec<String>,
    pub files: Vec<FileDigest>,
    pub pass: bool,
}

/// Collects checks and files while a command runs.
pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: Option<&RunConfig>) -> Self {
        ManifestBuilder {
            started: Instant::now(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                config: config.cloned(),
                started_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                wall_seconds: 0.0,
                steps: 0,
                derived: BTreeMap::new(),
                checks: Vec::new(),
                claims: Vec::new(),
                files: Vec::new(),
                pass: true,
            },
        }
    }

    pub fn derive(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.manifest.derived.insert(key.into(), v);
    }

    pub fn steps(&mut self, n: u64) {
        self.manifest.steps += n;
    }

    pub fn claim(&mut self, id: &str) {
        if !self.manifest.claims.iter().any(|c| c == id) {
            self.manifest.claims.push(id.into());
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, value: f64, bound: &str) -> bool {
        self.manifest.checks.push(Check {
            name: name.into(),
            pass,
            value,
            bound: bound.into(),
        });
        pass
    }

    pub fn checks(&self) -> &[Check] {
        &self.manifest.checks
    }

    /// Writes `bytes` to `dir/name` and records its digest.
    pub fn write_file(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.manifest.files.push(FileDigest {
            path: name.into(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json(&mut self, dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_file(dir, name, text.as_bytes())
    }

    /// Writes `field_000.json`, `field_001.json`, ... under `dir/sub`.
    pub fn write_fields(&mut self, dir: &Path, sub: &str, fields: &[ScalarField]) -> Result<()> {
        for (i, f) in fields.iter().enumerate() {
            let name = if sub.is_empty() {
                field_name(i)
            } else {
                format!("{sub}/{}", field_name(i))
            };
            self.write_file(dir, &name, f.to_json().as_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self, dir: Option<&Path>) -> Result<RunManifest> {
        self.manifest.wall_seconds = self.started.elapsed().as_secs_f64();
        self.manifest.pass = self.manifest.checks.iter().all(|c| c.pass);
        if let Some(dir) = dir {
            std::fs::create_dir_all(dir)?;
            let text = serde_json::to_string_pretty(&self.manifest)?;
            std::fs::write(dir.join("manifest.json"), text)?;
        }
        Ok(self.manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn field_name(i: usize) -> String {
    format!("field_{i:03}.json")
}

/// Loads every `field_*.json` in `dir`, sorted by name. All offending files
/// are listed in the error.
pub fn read_fields(dir: &Path) -> Result<Vec<ScalarField>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Format(format!("{}: {e}", dir.display())))?;
    let mut names: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("field_") && n.ends_with(".json"))
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Format(format!("no field_*.json files in {}", dir.display())));
    }
    let mut fields = Vec::new();
    let mut bad = Vec::new();
    for p in &names {
        match std::fs::read_to_string(p).map_err(Error::from).and_then(|s| ScalarField::from_json(&s)) {
            Ok(f) => fields.push(f),
            Err(e) => bad.push(format!("{}: {e}", p.display())),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Format(format!("unreadable field files: {}", bad.join("; "))));
    }
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UniformGrid;

    #[test]
    fn digests_and_round_trip() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let dir = tempfile::tempdir().unwrap();
        let g = UniformGrid::new(1, 4).unwrap();
        let fields: Vec<ScalarField> = (0..3).map(|i| ScalarField::constant(g, i as f64, i as f64)).collect();
        let mut m = ManifestBuilder::new("test", None);
        m.write_fields(dir.path(), "", &fields).unwrap();
        m.check("ok", true, 1.0, "<= 2");
        m.claim("a");
        m.claim("a");
        let man = m.finish(Some(dir.path())).unwrap();
        assert!(man.pass);
        assert_eq!(man.files.len(), 3);
        assert_eq!(man.claims, vec!["a".to_string()]);
        let back = read_fields(dir.path()).unwrap();
        assert_eq!(back, fields);
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let parsed: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.files[0].sha256, sha256_hex(fields[0].to_json().as_bytes()));
    }

    #[test]
    fn corrupt_files_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("field_000.json"), "{").unwrap();
        std::fs::write(dir.path().join("field_001.json"), "[]").unwrap();
        let e = read_fields(dir.path()).unwrap_err().to_string();
        assert!(e.contains("field_000.json") && e.contains("field_001.json"), "{e}");
        let empty = tempfile::tempdir().unwrap();
        assert!(read_fields(empty.path()).is_err());
    }
}
