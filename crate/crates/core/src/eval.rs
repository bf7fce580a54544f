//! Precision, recall and F1 against held-out gold labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{probs} predictions but {gold} gold labels")]
    LengthMismatch { probs: usize, gold: usize },
    #[error("gold label {0} is not +1 or -1")]
    InvalidGold(i8),
    #[error("nothing to average")]
    Empty,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

/// Scores probabilities against ±1 gold labels; a prediction is positive
/// iff its probability exceeds `threshold`.
pub fn prf1(probs: &[f64], gold: &[i8], threshold: f64) -> Result<Metrics, EvalError> {
    if probs.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            probs: probs.len(),
            gold: gold.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &g) in probs.iter().zip(gold) {
        let pred = p > threshold;
        match g {
            1 if pred => tp += 1,
            1 => fn_ += 1,
            -1 if pred => fp += 1,
            -1 => {}
            other => return Err(EvalError::InvalidGold(other)),
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_))
}

/// Field-wise mean of precision, recall and F1. Counts are summed.
pub fn macro_average(runs: &[Metrics]) -> Result<Metrics, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = runs.len() as f64;
    let mean = |f: fn(&Metrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
    Ok(Metrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        tp: runs.iter().map(|m| m.tp).sum(),
        fp: runs.iter().map(|m| m.fp).sum(),
        fn_: runs.iter().map(|m| m.fn_).sum(),
    })
}

/// Runs `f` once per seed and averages the resulting metrics.
pub fn seed_mean<E, F>(seeds: &[u64], mut f: F) -> Result<(Vec<Metrics>, Metrics), E>
where
    F: FnMut(u64) -> Result<Metrics, E>,
    E: From<EvalError>,
{
    let runs = seeds.iter().map(|&s| f(s)).collect::<Result<Vec<_>, E>>()?;
    let mean = macro_average(&runs)?;
    Ok((runs, mean))
}
