//! Artifact files inside a working directory, and the manifest that ties
//! each of them to a config hash.
//!
//! JSONL files keep their plain record schema; their hash lives in
//! `manifest.json`. Markdown, TSV and text files start with a
//! `# config_hash: …` line and JSON files carry a `config_hash` field.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
const HASH_PREFIX: &str = "# config_hash: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub config_hash: String,
    pub sha256: String,
    pub command: String,
}

pub type Manifest = BTreeMap<String, ManifestEntry>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl<T: DeserializeOwned>(file: &str, raw: &str) -> Result<Vec<T>> {
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse(file, format!("line {}", n + 1), e))
        })
        .collect()
}

/// Header line carried by text artifacts, if present.
pub fn embedded_hash(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix(HASH_PREFIX)
}

fn is_text_artifact(rel: &str) -> bool {
    [".md", ".tsv", ".txt"].iter().any(|e| rel.ends_with(e))
}

/// A working directory bound to one config hash.
#[derive(Debug)]
pub struct Workspace {
    root: PathBuf,
    hash: String,
    manifest: Mutex<Manifest>,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>, config_hash: impl Into<String>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let path = root.join(MANIFEST);
        let manifest = if path.exists() {
            let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_str(&raw)
                .map_err(|e| Error::parse(path.display().to_string(), "<root>", e))?
        } else {
            Manifest::new()
        };
        Ok(Workspace {
            root,
            hash: config_hash.into(),
            manifest: Mutex::new(manifest),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest(&self) -> Manifest {
        self.manifest.lock().expect("manifest lock").clone()
    }

    /// Writes an artifact, prefixing text formats with the hash header, and
    /// records it in the manifest.
    pub fn write(&self, rel: &str, contents: &str, command: &str) -> Result<()> {
        let body = if is_text_artifact(rel) {
            format!("{HASH_PREFIX}{}\n{contents}", self.hash)
        } else {
            contents.to_owned()
        };
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, &body).map_err(|e| Error::io(&path, e))?;
        let mut manifest = self.manifest.lock().expect("manifest lock");
        manifest.insert(
            rel.to_owned(),
            ManifestEntry {
                config_hash: self.hash.clone(),
                sha256: sha256_hex(body.as_bytes()),
                command: command.to_owned(),
            },
        );
        let json = serde_json::to_string_pretty(&*manifest).expect("manifest serializes") + "\n";
        let mpath = self.path(MANIFEST);
        fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))
    }

    pub fn write_jsonl<T: Serialize>(&self, rel: &str, records: &[T], command: &str) -> Result<()> {
        self.write(rel, &to_jsonl(records), command)
    }

    /// Writes a JSON object with a leading `config_hash` field.
    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T, command: &str) -> Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), self.hash.clone().into());
        match serde_json::to_value(value).expect("value serializes") {
            serde_json::Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("value".into(), other);
            }
        }
        let json = serde_json::to_string_pretty(&serde_json::Value::Object(obj))
            .expect("json serializes")
            + "\n";
        self.write(rel, &json, command)
    }

    /// Reads an artifact that `command` produces, failing with the command
    /// name when it is missing.
    pub fn read(&self, rel: &str, command: &'static str) -> Result<String> {
        let path = self.path(rel);
        if !path.exists() {
            return Err(Error::MissingArtifact { path, command });
        }
        fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
    }

    pub fn read_jsonl<T: DeserializeOwned>(
        &self,
        rel: &str,
        command: &'static str,
    ) -> Result<Vec<T>> {
        let raw = self.read(rel, command)?;
        parse_jsonl(&self.path(rel).display().to_string(), &raw)
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str, command: &'static str) -> Result<T> {
        let raw = self.read(rel, command)?;
        serde_json::from_str(&raw)
            .map_err(|e| Error::parse(self.path(rel).display().to_string(), "<root>", e))
    }

    /// Text artifact without its hash header.
    pub fn read_text(&self, rel: &str, command: &'static str) -> Result<String> {
        let raw = self.read(rel, command)?;
        Ok(match embedded_hash(&raw) {
            Some(_) => raw
                .split_once('\n')
                .map_or(String::new(), |(_, rest)| rest.to_owned()),
            None => raw,
        })
    }

    /// Checks that every manifest entry was written under the current hash,
    /// that the file still matches its recorded digest, and that any
    /// embedded hash agrees.
    pub fn verify(&self) -> Result<()> {
        for (rel, entry) in self.manifest() {
            let mismatch = |found: String| Error::ConfigHashMismatch {
                path: rel.clone(),
                expected: self.hash.clone(),
                found,
            };
            if entry.config_hash != self.hash {
                return Err(mismatch(entry.config_hash));
            }
            let path = self.path(&rel);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if sha256_hex(&bytes) != entry.sha256 {
                return Err(Error::Config(format!(
                    "{rel} was modified after `{}` wrote it",
                    entry.command
                )));
            }
            let text = String::from_utf8_lossy(&bytes);
            let embedded = if is_text_artifact(&rel) {
                embedded_hash(&text).map(str::to_owned)
            } else if rel.ends_with(".json") {
                serde_json::from_str::<serde_json::Value>(&text)
                    .ok()
                    .and_then(|v| {
                        v.get("config_hash")
                            .and_then(|h| h.as_str())
                            .map(str::to_owned)
                    })
            } else {
                None
            };
            if let Some(found) = embedded {
                if found != self.hash {
                    return Err(mismatch(found));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_artifacts_carry_hash_and_manifest_tracks_all() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path(), "abc").unwrap();
        ws.write("vocab/e.txt", "1\tindustry\t1.0\n", "vocab")
            .unwrap();
        ws.write_jsonl("x.jsonl", &[1, 2], "build").unwrap();
        ws.write_json("s.json", &serde_json::json!({"seed": 1}), "split")
            .unwrap();
        let raw = fs::read_to_string(dir.path().join("vocab/e.txt")).unwrap();
        assert_eq!(embedded_hash(&raw), Some("abc"));
        assert_eq!(
            ws.read_text("vocab/e.txt", "vocab").unwrap(),
            "1\tindustry\t1.0\n"
        );
        assert_eq!(
            ws.read_jsonl::<u32>("x.jsonl", "build").unwrap(),
            vec![1, 2]
        );
        let v: serde_json::Value = ws.read_json("s.json", "split").unwrap();
        assert_eq!(v["config_hash"], "abc");
        assert_eq!(ws.manifest().len(), 3);
        ws.verify().unwrap();

        let reopened = Workspace::open(dir.path(), "abc").unwrap();
        assert_eq!(reopened.manifest(), ws.manifest());
        let other = Workspace::open(dir.path(), "def").unwrap();
        assert!(matches!(
            other.verify(),
            Err(Error::ConfigHashMismatch { .. })
        ));
    }

    #[test]
    fn missing_artifact_names_command() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path(), "abc").unwrap();
        let err = ws.read("instances.jsonl", "build").unwrap_err().to_string();
        assert!(err.contains("run `reframe build` first"), "{err}");
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path(), "abc").unwrap();
        ws.write_jsonl("x.jsonl", &[1], "build").unwrap();
        fs::write(dir.path().join("x.jsonl"), "2\n").unwrap();
        assert!(ws.verify().is_err());
    }
}
