//! Artifact bookkeeping: every file a run writes is recorded with its
//! SHA-256 so reruns can be compared byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Written instead of the manifest when a run stops early.
pub const PARTIAL_MARKER: &str = ".partial";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Ticks,
    Collections,
    DailyPattern,
    Panel,
    Ccdf,
    TailFits,
    Acf,
    FluctuationGrid,
    Hurst,
    Matrix,
    MatrixMeta,
    Histogram,
    Spectrum,
    Eigenvector,
    FilteredPanel,
    TreeEdges,
    TreeNodes,
    Degrees,
    Figure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub kind: ArtifactKind,
    pub stage: String,
    /// Ties together artifacts of one series or one matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub inputs: Vec<InputHash>,
    pub stages: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn new(config_sha256: String) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_sha256,
            inputs: Vec::new(),
            stages: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn of_kind(&self, kind: ArtifactKind) -> impl Iterator<Item = &Artifact> {
        self.artifacts.iter().filter(move |a| a.kind == kind)
    }

    pub fn find(&self, kind: ArtifactKind, group: &str) -> Option<&Artifact> {
        self.of_kind(kind).find(|a| a.group.as_deref() == Some(group))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files under a root directory and records them.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    pub manifest: Manifest,
    stage: String,
}

impl ArtifactWriter {
    pub fn new(root: &Path, manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            stage: String::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn begin_stage(&mut self, stage: &str) {
        self.stage = stage.to_string();
        self.manifest.stages.push(stage.to_string());
    }

    pub fn stage(&self) -> &str {
        &self.stage
    }

    pub fn write(&mut self, rel: &str, kind: ArtifactKind, group: Option<&str>, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.artifacts.push(Artifact {
            path: rel.to_string(),
            kind,
            stage: self.stage.clone(),
            group: group.map(str::to_string),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(
        &mut self,
        rel: &str,
        kind: ArtifactKind,
        group: Option<&str>,
        value: &T,
    ) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, kind, group, &bytes)
    }

    /// Records a completed run and clears any marker from an earlier failure.
    pub fn finish(&mut self) -> Result<()> {
        let _ = fs::remove_file(self.root.join(PARTIAL_MARKER));
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        fs::write(self.root.join(MANIFEST_FILE), bytes)?;
        Ok(())
    }

    /// Leaves what was written in place, flagged by a marker naming the
    /// failed stage.
    pub fn abandon(&self, error: &str) -> Result<()> {
        #[derive(Serialize)]
        struct Partial<'a> {
            failed_stage: &'a str,
            error: &'a str,
            manifest: &'a Manifest,
        }
        let _ = fs::remove_file(self.root.join(MANIFEST_FILE));
        let bytes = serde_json::to_vec_pretty(&Partial {
            failed_stage: &self.stage,
            error,
            manifest: &self.manifest,
        })?;
        fs::write(self.root.join(PARTIAL_MARKER), bytes)?;
        Ok(())
    }
}

/// Label made safe for use in a file name.
pub fn file_stem(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn write_finish_and_abandon() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::new(dir.path(), Manifest::new("c".into())).unwrap();
        w.begin_stage("panel");
        w.write("panel/p.csv", ArtifactKind::Panel, None, b"t,a\n0,1\n")
            .unwrap();
        w.abandon("boom").unwrap();
        assert!(dir.path().join(PARTIAL_MARKER).exists());
        assert!(dir.path().join("panel/p.csv").exists());
        w.finish().unwrap();
        assert!(!dir.path().join(PARTIAL_MARKER).exists());
        let m = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.artifacts.len(), 1);
        assert_eq!(m.artifacts[0].stage, "panel");
        assert_eq!(m.artifacts[0].sha256, sha256_hex(b"t,a\n0,1\n"));
    }

    #[test]
    fn stems() {
        assert_eq!(file_stem("Bored Ape/YC"), "Bored_Ape_YC");
        assert_eq!(file_stem(""), "_");
    }
}
