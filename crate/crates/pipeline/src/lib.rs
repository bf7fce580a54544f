//! Stage orchestration, artifact store and annotation service for the
//! label-diagnosis pipeline.

pub mod config;
pub mod report;
pub mod server;
pub mod stages;
pub mod store;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{FusionMode, PipelineConfig};
pub use stages::{AnnotationSource, Pipeline, StageOutcome};
pub use store::{ArtifactStore, Stage};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` needs the outputs of `{missing}`; run `patdiag {}` first", .missing.command())]
    MissingStage { stage: Stage, missing: Stage },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] patdiag_core::Error),
    #[error("port {port} is unavailable: {source}")]
    PortBusy {
        port: u16,
        #[source]
        source: std::io::Error,
    },
    #[error("induced pattern {pattern:?} does not match its source instance {instance:?}")]
    Unsound { pattern: String, instance: String },
    #[error("the session has no annotations")]
    NoAnnotations,
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

macro_rules! via_core {
    ($($t:ty),* $(,)?) => {
        $(impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Core(e.into())
            }
        })*
    };
}

via_core!(
    patdiag_core::corpus::CorpusError,
    patdiag_core::corpus::SyntheticError,
    patdiag_core::nre::NreError,
    patdiag_core::agent::AgentError,
    patdiag_core::pattern::PatternError,
    patdiag_core::refinement::RefinementError,
    patdiag_core::wlf::WlfError,
    patdiag_core::eval::EvalError,
);
