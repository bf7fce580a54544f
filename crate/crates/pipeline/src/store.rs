//! Artifact directory layout and per-stage manifests.
//!
//! Each completed stage writes `manifests/<stage>.json` recording a key
//! derived from its configuration slice, its extra inputs and the keys of
//! the stages it reads. A stage whose recorded key equals the freshly
//! computed one is skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::PipelineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Corpus,
    TrainNre,
    Extract,
    Refine,
    Fuse,
    Retrain,
    Eval,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Corpus,
        Stage::TrainNre,
        Stage::Extract,
        Stage::Refine,
        Stage::Fuse,
        Stage::Retrain,
        Stage::Eval,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Corpus => "corpus",
            Stage::TrainNre => "train-nre",
            Stage::Extract => "extract",
            Stage::Refine => "refine",
            Stage::Fuse => "fuse",
            Stage::Retrain => "retrain",
            Stage::Eval => "eval",
            Stage::Report => "report",
        }
    }

    /// Command that produces this stage's artifacts.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Corpus => "synth` or `ingest",
            other => other.name(),
        }
    }

    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Corpus => &[],
            Stage::TrainNre => &[Stage::Corpus],
            Stage::Extract => &[Stage::TrainNre],
            Stage::Refine => &[Stage::Extract],
            Stage::Fuse => &[Stage::Refine],
            Stage::Retrain => &[Stage::Fuse],
            Stage::Eval => &[Stage::TrainNre, Stage::Retrain],
            Stage::Report => &[Stage::Eval],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub key: String,
    pub config_hash: String,
    pub upstream: BTreeMap<String, String>,
    /// Free-form provenance, such as the corpus source or annotation source.
    #[serde(default)]
    pub note: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_json(value: &serde_json::Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

pub fn hash_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn stage_key(
    stage: Stage,
    config_hash: &str,
    upstream: &BTreeMap<String, String>,
    extra: &str,
) -> String {
    let mut h = Sha256::new();
    h.update(stage.name().as_bytes());
    h.update([0]);
    h.update(config_hash.as_bytes());
    for (k, v) in upstream {
        h.update([0]);
        h.update(k.as_bytes());
        h.update([1]);
        h.update(v.as_bytes());
    }
    h.update([0]);
    h.update(extra.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Clone, Debug)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn open(root: &Path) -> Result<Self, PipelineError> {
        let store = ArtifactStore {
            root: root.to_path_buf(),
        };
        for d in [
            "corpora",
            "models/ds",
            "models/retrained",
            "agents",
            "patterns",
            "sessions",
            "labels",
            "reports",
            "manifests",
        ] {
            let p = store.root.join(d);
            std::fs::create_dir_all(&p).map_err(|e| PipelineError::io(&p, e))?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn train_corpus(&self) -> PathBuf {
        self.path("corpora/train.jsonl")
    }

    pub fn test_corpus(&self) -> PathBuf {
        self.path("corpora/test.jsonl")
    }

    pub fn vocabulary(&self) -> PathBuf {
        self.path("corpora/vocab.json")
    }

    pub fn ds_model(&self, seed: u64) -> PathBuf {
        self.path(&format!("models/ds/seed{seed}.ckpt"))
    }

    pub fn ds_log(&self, seed: u64) -> PathBuf {
        self.path(&format!("models/ds/seed{seed}.log.jsonl"))
    }

    pub fn retrained_model(&self, seed: u64) -> PathBuf {
        self.path(&format!("models/retrained/seed{seed}.ckpt"))
    }

    pub fn retrained_log(&self, seed: u64) -> PathBuf {
        self.path(&format!("models/retrained/seed{seed}.log.jsonl"))
    }

    pub fn agent(&self, eta: f64) -> PathBuf {
        self.path(&format!("agents/eta{eta}.ckpt"))
    }

    pub fn extractions(&self) -> PathBuf {
        self.path("agents/extractions.jsonl")
    }

    pub fn agent_rewards(&self) -> PathBuf {
        self.path("agents/rewards.json")
    }

    pub fn pattern_text(&self) -> PathBuf {
        self.path("patterns/patterns.txt")
    }

    pub fn pattern_json(&self) -> PathBuf {
        self.path("patterns/patterns.json")
    }

    pub fn selected_patterns(&self) -> PathBuf {
        self.path("patterns/selected.txt")
    }

    pub fn session(&self) -> PathBuf {
        self.path("sessions/session.json")
    }

    pub fn journal(&self) -> PathBuf {
        self.path("sessions/journal.jsonl")
    }

    pub fn verdicts(&self) -> PathBuf {
        self.path("sessions/verdicts.json")
    }

    pub fn soft_labels(&self) -> PathBuf {
        self.path("labels/soft_labels.jsonl")
    }

    pub fn wlf_params(&self) -> PathBuf {
        self.path("labels/wlf_params.json")
    }

    pub fn eval_report(&self) -> PathBuf {
        self.path("reports/eval.json")
    }

    pub fn report_json(&self) -> PathBuf {
        self.path("reports/report.json")
    }

    pub fn report_text(&self) -> PathBuf {
        self.path("reports/report.txt")
    }

    pub fn diagnosis_json(&self) -> PathBuf {
        self.path("reports/diagnosis.json")
    }

    pub fn diagnosis_text(&self) -> PathBuf {
        self.path("reports/diagnosis.txt")
    }

    fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.path(&format!("manifests/{}.json", stage.name()))
    }

    pub fn manifest(&self, stage: Stage) -> Result<Option<Manifest>, PipelineError> {
        let p = self.manifest_path(stage);
        match std::fs::read_to_string(&p) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(PipelineError::io(&p, e)),
        }
    }

    pub fn write_manifest(&self, m: &Manifest, stage: Stage) -> Result<(), PipelineError> {
        let p = self.manifest_path(stage);
        let mut text = serde_json::to_string_pretty(m)?;
        text.push('\n');
        std::fs::write(&p, text).map_err(|e| PipelineError::io(&p, e))
    }

    pub fn remove_manifest(&self, stage: Stage) -> Result<(), PipelineError> {
        let p = self.manifest_path(stage);
        match std::fs::remove_file(&p) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(PipelineError::io(&p, e)),
        }
    }

    /// Keys of the upstream stages; errors naming the first missing one.
    pub fn upstream_keys(&self, stage: Stage) -> Result<BTreeMap<String, String>, PipelineError> {
        let mut keys = BTreeMap::new();
        for &up in stage.upstream() {
            let m = self
                .manifest(up)?
                .ok_or(PipelineError::MissingStage { stage, missing: up })?;
            keys.insert(up.name().to_string(), m.key);
        }
        Ok(keys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_depend_on_every_input() {
        let up: BTreeMap<String, String> = [("corpus".to_string(), "abc".to_string())].into();
        let k = stage_key(Stage::TrainNre, "h", &up, "");
        assert_eq!(k, stage_key(Stage::TrainNre, "h", &up, ""));
        assert_ne!(k, stage_key(Stage::TrainNre, "h2", &up, ""));
        assert_ne!(k, stage_key(Stage::TrainNre, "h", &up, "x"));
        assert_ne!(k, stage_key(Stage::Extract, "h", &up, ""));
        let up2: BTreeMap<String, String> = [("corpus".to_string(), "abd".to_string())].into();
        assert_ne!(k, stage_key(Stage::TrainNre, "h", &up2, ""));
    }

    #[test]
    fn missing_upstream_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let err = store.upstream_keys(Stage::Extract).unwrap_err();
        assert!(err.to_string().contains("train-nre"), "{err}");
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
