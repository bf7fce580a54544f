//! Weak label fusion by data programming.
//!
//! Each labeling function `i` has an accuracy `alpha_i` and a coverage
//! `beta_i`. Under the uniform class prior the joint factorises as
//!
//! ```text
//! P(L, Y) = 1/2 * prod_i f_i(Y),
//! f_i(y) = beta_i alpha_i        if L_i = y
//!          beta_i (1 - alpha_i)  if L_i = -y
//!          1 - beta_i            if L_i = 0
//! ```
//!
//! and the soft label of an instance is `P(Y = +1 | L)`.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Label};
use crate::pattern::{MatchIndex, Pattern};

pub const DEFAULT_DELTA: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum WlfError {
    #[error("pattern {0:?} is both positive and negative")]
    ConflictingPattern(String),
    #[error("the annotated set is empty")]
    EmptyAnnotations,
    #[error("label vector has {found} entries, parameters cover {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid label {0}; expected -1, 0 or +1")]
    InvalidLabel(i8),
    #[error("label file line {line}: {message}")]
    LabelFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelingFunction {
    Ds,
    PositivePattern(Pattern),
    NegativePattern(Pattern),
}

impl LabelingFunction {
    pub fn name(&self) -> String {
        match self {
            LabelingFunction::Ds => "DS".to_string(),
            LabelingFunction::PositivePattern(p) => format!("POS:{p}"),
            LabelingFunction::NegativePattern(p) => format!("NEG:{p}"),
        }
    }
}

/// One row per corpus instance; column 0 is the DS labeling function.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    pub lf_names: Vec<String>,
    pub rows: Vec<Vec<i8>>,
}

impl LabelMatrix {
    pub fn n_lfs(&self) -> usize {
        self.lf_names.len()
    }
}

/// Applies DS and the accepted pattern sets to every instance.
pub fn apply_lfs(
    corpus: &Corpus,
    positive: &[Pattern],
    negative: &[Pattern],
) -> Result<LabelMatrix, WlfError> {
    let pos_set: BTreeSet<&str> = positive.iter().map(|p| p.canonical_text()).collect();
    if let Some(p) = negative
        .iter()
        .find(|p| pos_set.contains(p.canonical_text()))
    {
        return Err(WlfError::ConflictingPattern(p.to_string()));
    }
    let mut lfs = vec![LabelingFunction::Ds];
    lfs.extend(
        positive
            .iter()
            .cloned()
            .map(LabelingFunction::PositivePattern),
    );
    lfs.extend(
        negative
            .iter()
            .cloned()
            .map(LabelingFunction::NegativePattern),
    );

    let mut rows: Vec<Vec<i8>> = corpus
        .instances
        .iter()
        .map(|inst| {
            let mut row = vec![0i8; lfs.len()];
            row[0] = inst.ds_label.sign();
            row
        })
        .collect();
    let index = MatchIndex::new(corpus);
    for (col, lf) in lfs.iter().enumerate().skip(1) {
        let (pattern, vote) = match lf {
            LabelingFunction::PositivePattern(p) => (p, 1),
            LabelingFunction::NegativePattern(p) => (p, -1),
            LabelingFunction::Ds => unreachable!(),
        };
        for pos in index.matching(pattern) {
            rows[pos][col] = vote;
        }
    }
    Ok(LabelMatrix {
        lf_names: lfs.iter().map(LabelingFunction::name).collect(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WlfParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lf_names: Vec<String>,
}

impl WlfParams {
    pub fn save(&self, path: &Path) -> Result<(), WlfError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, WlfError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Closed-form supervised estimates on annotated rows, clamped to `[delta, 1 - delta]`.
pub fn estimate(
    labeled: &[(Vec<i8>, Label)],
    lf_names: &[String],
    delta: f64,
) -> Result<WlfParams, WlfError> {
    if labeled.is_empty() {
        return Err(WlfError::EmptyAnnotations);
    }
    let m = lf_names.len();
    let mut fired = vec![0usize; m];
    let mut agreed = vec![0usize; m];
    for (row, y) in labeled {
        if row.len() != m {
            return Err(WlfError::DimensionMismatch {
                expected: m,
                found: row.len(),
            });
        }
        for (i, &l) in row.iter().enumerate() {
            match l {
                0 => {}
                1 | -1 => {
                    fired[i] += 1;
                    if l == y.sign() {
                        agreed[i] += 1;
                    }
                }
                other => return Err(WlfError::InvalidLabel(other)),
            }
        }
    }
    let clamp = |v: f64| v.clamp(delta, 1.0 - delta);
    let n = labeled.len() as f64;
    let alpha = (0..m)
        .map(|i| {
            if fired[i] == 0 {
                0.5
            } else {
                clamp(agreed[i] as f64 / fired[i] as f64)
            }
        })
        .collect();
    let beta = fired.iter().map(|&f| clamp(f as f64 / n)).collect();
    Ok(WlfParams {
        alpha,
        beta,
        lf_names: lf_names.to_vec(),
    })
}

fn log_factor(l: i8, y: i8, alpha: f64, beta: f64) -> f64 {
    if l == 0 {
        (1.0 - beta).ln()
    } else if l == y {
        beta.ln() + alpha.ln()
    } else {
        beta.ln() + (1.0 - alpha).ln()
    }
}

/// `P(Y = +1 | L)`, evaluated in log space.
pub fn posterior(row: &[i8], params: &WlfParams) -> Result<f64, WlfError> {
    if row.len() != params.alpha.len() || params.beta.len() != params.alpha.len() {
        return Err(WlfError::DimensionMismatch {
            expected: params.alpha.len(),
            found: row.len(),
        });
    }
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (i, &l) in row.iter().enumerate() {
        if !matches!(l, -1..=1) {
            return Err(WlfError::InvalidLabel(l));
        }
        pos += log_factor(l, 1, params.alpha[i], params.beta[i]);
        neg += log_factor(l, -1, params.alpha[i], params.beta[i]);
    }
    Ok(match (pos.is_finite(), neg.is_finite()) {
        (false, false) => 0.5,
        (true, false) => 1.0,
        (false, true) => 0.0,
        // P = 1 / (1 + exp(neg - pos))
        (true, true) => crate::numerics::sigmoid(pos - neg),
    })
}

/// Soft labels for every row of the matrix.
pub fn denoise(matrix: &LabelMatrix, params: &WlfParams) -> Result<Vec<f64>, WlfError> {
    matrix.rows.iter().map(|r| posterior(r, params)).collect()
}

/// DS labels with the annotated instances overridden by their human label.
pub fn gold_mix(corpus: &Corpus, annotations: &[(String, Label)]) -> Vec<f64> {
    let mut labels = corpus.ds_targets();
    for (id, label) in annotations {
        if let Some(pos) = corpus.position(id) {
            labels[pos] = label.target();
        }
    }
    labels
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel {
    pub instance_id: String,
    pub soft_label: f64,
}

pub fn write_label_file(path: &Path, corpus: &Corpus, labels: &[f64]) -> Result<(), WlfError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for (inst, &p) in corpus.instances.iter().zip(labels) {
        let rec = SoftLabel {
            instance_id: inst.id.clone(),
            soft_label: p,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a label file back into corpus order; every instance must be covered.
pub fn read_label_file(path: &Path, corpus: &Corpus) -> Result<Vec<f64>, WlfError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut labels = vec![None; corpus.len()];
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| WlfError::LabelFile {
            line: k + 1,
            message,
        };
        let rec: SoftLabel = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if !(0.0..=1.0).contains(&rec.soft_label) {
            return Err(err(format!("soft label {} outside [0, 1]", rec.soft_label)));
        }
        let pos = corpus
            .position(&rec.instance_id)
            .ok_or_else(|| err(format!("unknown instance {:?}", rec.instance_id)))?;
        labels[pos] = Some(rec.soft_label);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| WlfError::LabelFile {
                line: 0,
                message: format!("no label for instance {:?}", corpus.instances[i].id),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: Vec<f64>, beta: Vec<f64>) -> WlfParams {
        let names = (0..alpha.len()).map(|i| format!("lf{i}")).collect();
        WlfParams {
            alpha,
            beta,
            lf_names: names,
        }
    }

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("lf{i}")).collect()
    }

    #[test]
    fn closed_form_arithmetic() {
        let labeled = vec![
            (vec![1], Label::Positive),
            (vec![-1], Label::Positive),
            (vec![-1], Label::Negative),
            (vec![0], Label::Negative),
        ];
        let p = estimate(&labeled, &names(1), 0.0).unwrap();
        assert!((p.alpha[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.beta[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn silent_lf_is_uninformative() {
        let labeled = vec![
            (vec![1, 0], Label::Positive),
            (vec![-1, 0], Label::Negative),
        ];
        let p = estimate(&labeled, &names(2), DEFAULT_DELTA).unwrap();
        assert_eq!(p.alpha[1], 0.5);
        assert_eq!(p.beta[1], DEFAULT_DELTA);
        assert_eq!(p.alpha[0], 1.0 - DEFAULT_DELTA);
        assert!(matches!(
            estimate(&[], &names(1), DEFAULT_DELTA),
            Err(WlfError::EmptyAnnotations)
        ));
    }

    #[test]
    fn posterior_simple_cases() {
        let p = params(vec![0.9], vec![1.0]);
        assert!((posterior(&[1], &p).unwrap() - 0.9).abs() < 1e-12);
        let p = params(vec![0.7, 0.8], vec![0.4, 0.3]);
        assert!((posterior(&[0, 0], &p).unwrap() - 0.5).abs() < 1e-15);
        let perfect = params(vec![1.0], vec![1.0]);
        assert_eq!(posterior(&[1], &perfect).unwrap(), 1.0);
        assert_eq!(posterior(&[-1], &perfect).unwrap(), 0.0);
    }

    #[test]
    fn pattern_evidence_can_override_ds() {
        let p = params(vec![0.6, 0.95], vec![1.0, 1.0 - DEFAULT_DELTA]);
        let post = posterior(&[-1, 1], &p).unwrap();
        // 0.4 * 0.95 / (0.4 * 0.95 + 0.6 * 0.05)
        assert!((post - 0.38 / 0.41).abs() < 1e-12);
        assert!(post > 0.5);
    }

    #[test]
    fn symmetry() {
        let p = params(vec![0.7, 0.9, 0.2], vec![0.5, 0.3, 0.8]);
        let a = posterior(&[1, 0, -1], &p).unwrap();
        let b = posterior(&[-1, 0, 1], &p).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_and_label_errors() {
        let p = params(vec![0.7], vec![0.5]);
        assert!(matches!(
            posterior(&[1, 1], &p),
            Err(WlfError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            posterior(&[2], &p),
            Err(WlfError::InvalidLabel(2))
        ));
    }
}
