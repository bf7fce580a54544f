//! Diagnosis and repair of noisy distantly-supervised relation labels.
//!
//! The pipeline trains a relation classifier on distant-supervision (DS)
//! labels, trains token-erasing agents against it to induce patterns,
//! has a human (or an oracle) judge the most representative patterns, and
//! fuses the accepted patterns with DS into denoised soft labels.

pub mod agent;
pub mod corpus;
pub mod eval;
mod nn;
pub mod nre;
pub mod numerics;
pub mod pattern;
pub mod refinement;
pub mod wlf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unknown instance id {0:?}")]
    UnknownInstance(String),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Synthetic(#[from] corpus::SyntheticError),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Nre(#[from] nre::NreError),
    #[error(transparent)]
    Agent(#[from] agent::AgentError),
    #[error(transparent)]
    Pattern(#[from] pattern::PatternError),
    #[error(transparent)]
    Refinement(#[from] refinement::RefinementError),
    #[error(transparent)]
    Wlf(#[from] wlf::WlfError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
