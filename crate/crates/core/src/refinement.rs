//! Human-in-the-loop pattern refinement.
//!
//! A session samples up to `n_a` matched instances per pattern, collects one
//! label per instance (shared across patterns) and turns the per-pattern
//! accuracy into a verdict.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Label};
use crate::numerics::SeededRng;
use crate::pattern::{MatchIndex, Pattern};

pub const DEFAULT_P_H: f64 = 0.8;
pub const DEFAULT_P_L: f64 = 0.1;

#[derive(Debug, Error)]
pub enum RefinementError {
    #[error("pattern {0:?} matches no instance")]
    NoMatches(String),
    #[error("thresholds must satisfy 0 <= p_l < p_h <= 1 (got p_l={p_l}, p_h={p_h})")]
    Thresholds { p_l: f64, p_h: f64 },
    #[error("instance {0:?} is not an item of this session")]
    UnknownItem(String),
    #[error("label {0} is not +1 or -1")]
    InvalidLabel(i64),
    #[error("patterns with unlabelled items: {}", .0.join(", "))]
    Incomplete(Vec<String>),
    #[error("instance {0:?} has no gold label")]
    MissingGold(String),
    #[error("session is finalized")]
    Finalized,
    #[error("journal line {line}: {message}")]
    Journal { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn parse_label(value: i64) -> Result<Label, RefinementError> {
    match value {
        1 => Ok(Label::Positive),
        -1 => Ok(Label::Negative),
        other => Err(RefinementError::InvalidLabel(other)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionPattern {
    pub pattern: Pattern,
    /// Sampled instance ids, in presentation order.
    pub items: Vec<String>,
    pub n_matched: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub relation: String,
    pub patterns: Vec<SessionPattern>,
    pub annotations: BTreeMap<String, Label>,
    pub p_h: f64,
    pub p_l: f64,
    /// Bumped by every successful mutation.
    pub revision: u64,
    pub finalized: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VerdictClass {
    Positive,
    Negative,
    Discarded,
}

impl fmt::Display for VerdictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictClass::Positive => "POSITIVE",
            VerdictClass::Negative => "NEGATIVE",
            VerdictClass::Discarded => "DISCARDED",
        })
    }
}

/// Strict thresholds: accuracy equal to either bound is discarded.
pub fn classify(accuracy: f64, p_h: f64, p_l: f64) -> VerdictClass {
    if accuracy > p_h {
        VerdictClass::Positive
    } else if accuracy < p_l {
        VerdictClass::Negative
    } else {
        VerdictClass::Discarded
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternVerdict {
    pub pattern: Pattern,
    pub accuracy: f64,
    pub class: VerdictClass,
}

/// Labelling progress of one pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternProgress {
    pub pattern: Pattern,
    pub items: usize,
    pub labeled: usize,
    pub positive: usize,
    pub accuracy: Option<f64>,
}

/// Samples `n_a` matches per pattern without replacement.
pub fn create_session(
    patterns: &[Pattern],
    corpus: &Corpus,
    n_a: usize,
    seed: u64,
    p_h: f64,
    p_l: f64,
) -> Result<AnnotationSession, RefinementError> {
    if !(0.0 <= p_l && p_l < p_h && p_h <= 1.0) {
        return Err(RefinementError::Thresholds { p_l, p_h });
    }
    let index = MatchIndex::new(corpus);
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::with_capacity(patterns.len());
    for p in patterns {
        let mut matched = index.matching(p);
        if matched.is_empty() {
            return Err(RefinementError::NoMatches(p.to_string()));
        }
        let n_matched = matched.len();
        rng.shuffle(&mut matched);
        matched.truncate(n_a);
        out.push(SessionPattern {
            pattern: p.clone(),
            items: matched
                .into_iter()
                .map(|i| corpus.instances[i].id.clone())
                .collect(),
            n_matched,
        });
    }
    Ok(AnnotationSession {
        relation: corpus.relation.clone(),
        patterns: out,
        annotations: BTreeMap::new(),
        p_h,
        p_l,
        revision: 0,
        finalized: false,
    })
}

impl AnnotationSession {
    /// Distinct item ids in presentation order.
    pub fn items(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.patterns
            .iter()
            .flat_map(|p| p.items.iter())
            .filter(|id| seen.insert(id.as_str()))
            .map(String::as_str)
            .collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.patterns
            .iter()
            .any(|p| p.items.iter().any(|i| i == id))
    }

    pub fn label(&self, id: &str) -> Option<Label> {
        self.annotations.get(id).copied()
    }

    /// First unlabelled item in presentation order.
    pub fn next_pending(&self) -> Option<&str> {
        self.items()
            .into_iter()
            .find(|id| !self.annotations.contains_key(*id))
    }

    /// Labels an item; re-labelling overwrites.
    pub fn record(&mut self, id: &str, label: Label) -> Result<u64, RefinementError> {
        if self.finalized {
            return Err(RefinementError::Finalized);
        }
        if !self.contains(id) {
            return Err(RefinementError::UnknownItem(id.to_string()));
        }
        self.annotations.insert(id.to_string(), label);
        self.revision += 1;
        Ok(self.revision)
    }

    pub fn is_complete(&self) -> bool {
        self.next_pending().is_none()
    }

    pub fn progress(&self) -> Vec<PatternProgress> {
        self.patterns
            .iter()
            .map(|sp| {
                let labels: Vec<Label> = sp.items.iter().filter_map(|id| self.label(id)).collect();
                let positive = labels.iter().filter(|l| l.is_positive()).count();
                PatternProgress {
                    pattern: sp.pattern.clone(),
                    items: sp.items.len(),
                    labeled: labels.len(),
                    positive,
                    accuracy: (!labels.is_empty()).then(|| positive as f64 / labels.len() as f64),
                }
            })
            .collect()
    }

    /// Verdict per pattern; errors if any pattern still has unlabelled items.
    pub fn verdicts(&self) -> Result<Vec<PatternVerdict>, RefinementError> {
        let progress = self.progress();
        let incomplete: Vec<String> = progress
            .iter()
            .filter(|p| p.labeled < p.items)
            .map(|p| p.pattern.to_string())
            .collect();
        if !incomplete.is_empty() {
            return Err(RefinementError::Incomplete(incomplete));
        }
        Ok(progress
            .into_iter()
            .map(|p| {
                let accuracy = p.positive as f64 / p.items as f64;
                PatternVerdict {
                    class: classify(accuracy, self.p_h, self.p_l),
                    pattern: p.pattern,
                    accuracy,
                }
            })
            .collect())
    }

    pub fn finalize(&mut self) -> Result<Vec<PatternVerdict>, RefinementError> {
        let v = self.verdicts()?;
        if !self.finalized {
            self.finalized = true;
            self.revision += 1;
        }
        Ok(v)
    }

    /// Labels every item with its gold label.
    pub fn oracle_annotate(&mut self, corpus: &Corpus) -> Result<(), RefinementError> {
        for id in self
            .items()
            .into_iter()
            .map(str::to_string)
            .collect::<Vec<_>>()
        {
            let gold = corpus
                .get(&id)
                .ok_or_else(|| RefinementError::UnknownItem(id.clone()))?
                .gold_label
                .ok_or_else(|| RefinementError::MissingGold(id.clone()))?;
            self.record(&id, gold)?;
        }
        Ok(())
    }

    /// Annotated (id, label) pairs in id order.
    pub fn annotated(&self) -> Vec<(String, Label)> {
        self.annotations
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), RefinementError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RefinementError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Applies a journal on top of this session.
    pub fn replay(&mut self, entries: &[JournalEntry]) -> Result<(), RefinementError> {
        for e in entries {
            self.record(&e.instance_id, parse_label(e.label)?)?;
        }
        Ok(())
    }
}

/// One annotation event; `ts` is the session revision after the event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub ts: u64,
    pub instance_id: String,
    pub label: i64,
}

pub fn append_journal(path: &Path, entry: &JournalEntry) -> Result<(), RefinementError> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut line = serde_json::to_string(entry)?;
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, RefinementError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| RefinementError::Journal {
                line: k + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

pub fn write_verdicts(path: &Path, verdicts: &[PatternVerdict]) -> Result<(), RefinementError> {
    let mut text = serde_json::to_string_pretty(verdicts)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_verdicts(path: &Path) -> Result<Vec<PatternVerdict>, RefinementError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Splits verdicts into (positive, negative) pattern lists.
pub fn accepted_patterns(verdicts: &[PatternVerdict]) -> (Vec<Pattern>, Vec<Pattern>) {
    let pick = |c: VerdictClass| {
        verdicts
            .iter()
            .filter(|v| v.class == c)
            .map(|v| v.pattern.clone())
            .collect()
    };
    (pick(VerdictClass::Positive), pick(VerdictClass::Negative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntitySpan, Instance};

    fn corpus(n_born: usize, n_visit: usize) -> Corpus {
        let mut v = Vec::new();
        for k in 0..n_born {
            let mut i = Instance::new(
                format!("b{k}"),
                &["a", "born", "c"],
                EntitySpan::new(0, 1, "PER"),
                EntitySpan::new(2, 3, "CITY"),
                "r",
                Label::Negative,
            );
            i.gold_label = Some(Label::Positive);
            v.push(i);
        }
        for k in 0..n_visit {
            let mut i = Instance::new(
                format!("v{k}"),
                &["a", "visited", "c"],
                EntitySpan::new(0, 1, "PER"),
                EntitySpan::new(2, 3, "CITY"),
                "r",
                Label::Positive,
            );
            i.gold_label = Some(Label::Negative);
            v.push(i);
        }
        Corpus::from_instances(v, "r").unwrap()
    }

    fn pat(s: &str) -> Pattern {
        s.parse().unwrap()
    }

    #[test]
    fn samples_are_capped_by_availability() {
        let c = corpus(3, 20);
        let s = create_session(
            &[
                pat("ENTITY1:PER born ENTITY2:CITY"),
                pat("ENTITY1:PER visited ENTITY2:CITY"),
            ],
            &c,
            10,
            0,
            DEFAULT_P_H,
            DEFAULT_P_L,
        )
        .unwrap();
        assert_eq!(s.patterns[0].items.len(), 3);
        assert_eq!(s.patterns[1].items.len(), 10);
        assert_eq!(s.patterns[1].n_matched, 20);
    }

    #[test]
    fn zero_matches_is_error() {
        let c = corpus(3, 0);
        let r = create_session(&[pat("ENTITY1:PER x ENTITY2:CITY")], &c, 10, 0, 0.8, 0.1);
        assert!(matches!(r, Err(RefinementError::NoMatches(_))));
    }

    #[test]
    fn record_semantics() {
        let c = corpus(2, 0);
        let mut s =
            create_session(&[pat("ENTITY1:PER born ENTITY2:CITY")], &c, 10, 0, 0.8, 0.1).unwrap();
        s.record("b0", Label::Positive).unwrap();
        s.record("b0", Label::Negative).unwrap();
        assert_eq!(s.label("b0"), Some(Label::Negative));
        assert!(!s.is_complete());
        assert!(matches!(
            s.record("zz", Label::Positive),
            Err(RefinementError::UnknownItem(_))
        ));
        assert!(matches!(s.verdicts(), Err(RefinementError::Incomplete(_))));
        s.record("b1", Label::Positive).unwrap();
        assert!(s.is_complete());
        assert_eq!(s.revision, 3);
        assert!(matches!(
            parse_label(0),
            Err(RefinementError::InvalidLabel(0))
        ));
    }

    #[test]
    fn oracle_verdicts() {
        let c = corpus(12, 12);
        let mut s = create_session(
            &[
                pat("ENTITY1:PER born ENTITY2:CITY"),
                pat("ENTITY1:PER visited ENTITY2:CITY"),
            ],
            &c,
            10,
            4,
            DEFAULT_P_H,
            DEFAULT_P_L,
        )
        .unwrap();
        s.oracle_annotate(&c).unwrap();
        let v = s.verdicts().unwrap();
        assert_eq!(v[0].accuracy, 1.0);
        assert_eq!(v[0].class, VerdictClass::Positive);
        assert_eq!(v[1].accuracy, 0.0);
        assert_eq!(v[1].class, VerdictClass::Negative);
        assert_eq!(s.verdicts().unwrap(), v);
    }

    #[test]
    fn thresholds_are_strict() {
        assert_eq!(classify(0.9, 0.8, 0.1), VerdictClass::Positive);
        assert_eq!(classify(0.8, 0.8, 0.1), VerdictClass::Discarded);
        assert_eq!(classify(0.5, 0.8, 0.1), VerdictClass::Discarded);
        assert_eq!(classify(0.1, 0.8, 0.1), VerdictClass::Discarded);
        assert_eq!(classify(0.0, 0.8, 0.1), VerdictClass::Negative);
    }

    #[test]
    fn shared_items_are_labelled_once() {
        let c = corpus(4, 0);
        let s = create_session(
            &[
                pat("ENTITY1:PER born ENTITY2:CITY"),
                pat("ENTITY1:PER PAD{1,3} ENTITY2:CITY"),
            ],
            &c,
            10,
            0,
            0.8,
            0.1,
        )
        .unwrap();
        assert_eq!(s.items().len(), 4);
    }

    #[test]
    fn journal_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let c = corpus(2, 0);
        let base =
            create_session(&[pat("ENTITY1:PER born ENTITY2:CITY")], &c, 10, 0, 0.8, 0.1).unwrap();
        let mut s = base.clone();
        for (id, l) in [("b0", 1), ("b1", -1), ("b0", -1)] {
            let ts = s.record(id, parse_label(l).unwrap()).unwrap();
            append_journal(
                &path,
                &JournalEntry {
                    ts,
                    instance_id: id.into(),
                    label: l,
                },
            )
            .unwrap();
        }
        let mut resumed = base;
        resumed.replay(&read_journal(&path).unwrap()).unwrap();
        assert_eq!(resumed, s);
    }
}
