#![allow(dead_code)]

use std::path::Path;

use patdiag_pipeline::PipelineConfig;

/// Small enough that a full run takes a few seconds.
pub fn tiny_config(workdir: &Path) -> PipelineConfig {
    PipelineConfig {
        workdir: workdir.to_path_buf(),
        synth_vocab_size: 40,
        synth_n_instances: 300,
        nre_word_dim: 8,
        nre_pos_dim: 2,
        nre_max_rel_dist: 20,
        nre_hidden: 6,
        nre_max_epochs: 2,
        nre_validation_fraction: 0.1,
        agent_hidden: 4,
        agent_epochs: 1,
        eta_grid: vec![0.5],
        n_r: 4,
        n_a: 5,
        seeds: vec![0, 1],
        ..PipelineConfig::default()
    }
}
