//! Flat key-value pipeline configuration.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected so typos do not silently fall back to a default.

use std::path::{Path, PathBuf};

use patdiag_core::agent::{AgentConfig, DEFAULT_ETA_GRID};
use patdiag_core::corpus::{SyntheticSpec, DEFAULT_MAX_SENTENCE_LEN};
use patdiag_core::nre::NreConfig;
use patdiag_core::refinement::{DEFAULT_P_H, DEFAULT_P_L};
use patdiag_core::wlf::DEFAULT_DELTA;
use serde::{Deserialize, Serialize};

use crate::PipelineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Wlf,
    GoldMix,
    DsOnly,
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMode::Wlf => "wlf",
            FusionMode::GoldMix => "gold_mix",
            FusionMode::DsOnly => "ds_only",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub workdir: PathBuf,
    /// Training corpus for `ingest`.
    pub corpus: Option<PathBuf>,
    /// Held-out corpus with gold labels for `ingest`.
    pub test_corpus: Option<PathBuf>,
    pub max_sentence_len: usize,

    pub synth_relation: String,
    pub synth_vocab_size: usize,
    pub synth_n_instances: usize,
    pub synth_positive_templates: Vec<String>,
    pub synth_distractor_templates: Vec<String>,
    pub synth_fn_rate: f64,
    pub synth_fp_rate: f64,
    pub synth_positive_fraction: f64,
    pub synth_names_per_type: usize,
    pub synth_test_fraction: f64,

    pub word_vectors: Option<PathBuf>,
    pub nre_word_dim: usize,
    pub nre_pos_dim: usize,
    pub nre_max_rel_dist: usize,
    pub nre_hidden: usize,
    pub nre_dropout_embed: f64,
    pub nre_dropout_encoder: f64,
    pub nre_dropout_final: f64,
    pub nre_lr: f64,
    pub nre_batch_size: usize,
    pub nre_max_epochs: usize,
    pub nre_validation_fraction: f64,

    pub agent_hidden: usize,
    pub agent_lr: f64,
    pub agent_batch_size: usize,
    pub agent_epochs: usize,
    pub agent_epsilon: f64,
    pub agent_top_k: usize,
    pub agent_baseline: bool,
    pub eta_grid: Vec<f64>,

    pub n_r: usize,
    pub n_a: usize,
    pub p_h: f64,
    pub p_l: f64,

    pub fusion: FusionMode,
    pub wlf_delta: f64,

    /// Seed of the synthetic corpus, the agents and the annotation sample.
    pub seed: u64,
    /// Training seeds averaged in the report.
    pub seeds: Vec<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let nre = NreConfig::default();
        let agent = AgentConfig::default();
        let synth = SyntheticSpec::default();
        PipelineConfig {
            workdir: PathBuf::from("work"),
            corpus: None,
            test_corpus: None,
            max_sentence_len: DEFAULT_MAX_SENTENCE_LEN,
            synth_relation: synth.relation,
            synth_vocab_size: synth.vocab_size,
            synth_n_instances: synth.n_instances,
            synth_positive_templates: synth.positive_templates,
            synth_distractor_templates: synth.distractor_templates,
            synth_fn_rate: synth.fn_rate,
            synth_fp_rate: synth.fp_rate,
            synth_positive_fraction: synth.positive_fraction,
            synth_names_per_type: synth.names_per_type,
            synth_test_fraction: 0.2,
            word_vectors: None,
            nre_word_dim: nre.word_dim,
            nre_pos_dim: nre.pos_dim,
            nre_max_rel_dist: nre.max_rel_dist,
            nre_hidden: nre.hidden,
            nre_dropout_embed: nre.dropout_embed,
            nre_dropout_encoder: nre.dropout_encoder,
            nre_dropout_final: nre.dropout_final,
            nre_lr: nre.lr,
            nre_batch_size: nre.batch_size,
            nre_max_epochs: nre.max_epochs,
            nre_validation_fraction: nre.validation_fraction,
            agent_hidden: agent.hidden,
            agent_lr: agent.lr,
            agent_batch_size: agent.batch_size,
            agent_epochs: agent.epochs,
            agent_epsilon: agent.epsilon,
            agent_top_k: agent.top_k,
            agent_baseline: agent.baseline,
            eta_grid: DEFAULT_ETA_GRID.to_vec(),
            n_r: 20,
            n_a: 10,
            p_h: DEFAULT_P_H,
            p_l: DEFAULT_P_L,
            fusion: FusionMode::Wlf,
            wlf_delta: DEFAULT_DELTA,
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; a relative `workdir` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            Some(&mut cfg.workdir),
            cfg.corpus.as_mut(),
            cfg.test_corpus.as_mut(),
            cfg.word_vectors.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.eta_grid.is_empty() {
            return bad("eta_grid must not be empty");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if !(0.0 <= self.p_l && self.p_l < self.p_h && self.p_h <= 1.0) {
            return bad("thresholds must satisfy 0 <= p_l < p_h <= 1");
        }
        if self.n_r == 0 || self.n_a == 0 {
            return bad("n_r and n_a must be positive");
        }
        if !(0.0..0.5).contains(&self.wlf_delta) {
            return bad("wlf_delta must lie in [0, 0.5)");
        }
        if !(0.0..1.0).contains(&self.synth_test_fraction) {
            return bad("synth_test_fraction must lie in [0, 1)");
        }
        self.nre_config()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        for &eta in &self.eta_grid {
            self.agent_config(eta)
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn nre_config(&self) -> NreConfig {
        NreConfig {
            word_dim: self.nre_word_dim,
            pos_dim: self.nre_pos_dim,
            max_rel_dist: self.nre_max_rel_dist,
            hidden: self.nre_hidden,
            dropout_embed: self.nre_dropout_embed,
            dropout_encoder: self.nre_dropout_encoder,
            dropout_final: self.nre_dropout_final,
            lr: self.nre_lr,
            batch_size: self.nre_batch_size,
            max_epochs: self.nre_max_epochs,
            validation_fraction: self.nre_validation_fraction,
        }
    }

    pub fn agent_config(&self, eta: f64) -> AgentConfig {
        AgentConfig {
            hidden: self.agent_hidden,
            lr: self.agent_lr,
            batch_size: self.agent_batch_size,
            epochs: self.agent_epochs,
            epsilon: self.agent_epsilon,
            eta,
            top_k: self.agent_top_k,
            baseline: self.agent_baseline,
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            relation: self.synth_relation.clone(),
            vocab_size: self.synth_vocab_size,
            n_instances: self.synth_n_instances,
            positive_templates: self.synth_positive_templates.clone(),
            distractor_templates: self.synth_distractor_templates.clone(),
            fn_rate: self.synth_fn_rate,
            fp_rate: self.synth_fp_rate,
            positive_fraction: self.synth_positive_fraction,
            names_per_type: self.synth_names_per_type,
            seed: self.seed,
        }
    }

    /// Seeds trained by `train-nre`: the report seeds plus the extraction seed.
    pub fn training_seeds(&self) -> Vec<u64> {
        let mut s = self.seeds.clone();
        if !s.contains(&self.seed) {
            s.push(self.seed);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_published_values() {
        let c = PipelineConfig::default();
        assert_eq!(c.eta_grid, vec![0.05, 0.1, 0.5, 1.0, 1.5]);
        assert_eq!((c.n_r, c.n_a), (20, 10));
        assert_eq!((c.p_h, c.p_l), (0.8, 0.1));
        assert_eq!(c.agent_epsilon, 0.1);
        assert_eq!(c.agent_top_k, 10_000);
        assert_eq!(c.nre_word_dim, 100);
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(
            PipelineConfig::from_toml_str("").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn round_trip_and_overrides() {
        let c = PipelineConfig::from_toml_str("nre_hidden = 8\nfusion = \"gold_mix\"\n").unwrap();
        assert_eq!(c.nre_hidden, 8);
        assert_eq!(c.fusion, FusionMode::GoldMix);
        let back = PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml_str("nre_hiden = 8").is_err());
        assert!(PipelineConfig::from_toml_str("eta_grid = []").is_err());
        assert!(PipelineConfig::from_toml_str("p_h = 0.05").is_err());
        assert!(PipelineConfig::from_toml_str("agent_epsilon = 2.0").is_err());
    }
}
