//! Instances, corpora and JSONL ingestion.

mod synthetic;

pub use synthetic::{generate_synthetic, SyntheticError, SyntheticSpec};

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_SENTENCE_LEN: usize = 120;
pub const DEFAULT_MAX_REL_DIST: usize = 60;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {which} span [{start}, {end}) out of bounds for {len} tokens")]
    SpanOutOfBounds {
        line: usize,
        which: &'static str,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("line {line}: head and tail spans overlap")]
    OverlappingSpans { line: usize },
    #[error("line {line}: sentence has {len} tokens, limit is {max}")]
    TooLong { line: usize, len: usize, max: usize },
    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: relation {found:?} differs from corpus relation {expected:?}")]
    MixedRelation {
        line: usize,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary label, serialised as `1` / `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// Hard training target in [0, 1].
    pub fn target(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(format!("label must be 1 or -1, got {other}")),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.sign()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub entity_type: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, entity_type: impl Into<String>) -> Self {
        EntitySpan {
            start,
            end,
            entity_type: entity_type.into(),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= self.start && i < self.end
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// One sentence with a typed head/tail entity pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub tokens: Vec<String>,
    pub head: EntitySpan,
    pub tail: EntitySpan,
    pub relation: String,
    pub ds_label: Label,
    #[serde(default)]
    pub gold_label: Option<Label>,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        tokens: &[&str],
        head: EntitySpan,
        tail: EntitySpan,
        relation: impl Into<String>,
        ds_label: Label,
    ) -> Self {
        Instance {
            id: id.into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            head,
            tail,
            relation: relation.into(),
            ds_label,
            gold_label: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks the span/length invariants; `line` is only used for messages.
    pub fn validate(&self, line: usize, max_len: usize) -> Result<(), CorpusError> {
        let len = self.tokens.len();
        if len == 0 {
            return Err(CorpusError::Parse {
                line,
                message: "instance has no tokens".into(),
            });
        }
        if len > max_len {
            return Err(CorpusError::TooLong {
                line,
                len,
                max: max_len,
            });
        }
        if let Some(bad) = self
            .tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(CorpusError::Parse {
                line,
                message: format!("token {bad:?} is empty or contains whitespace"),
            });
        }
        for (which, span) in [("head", &self.head), ("tail", &self.tail)] {
            if span.start >= span.end || span.end > len {
                return Err(CorpusError::SpanOutOfBounds {
                    line,
                    which,
                    start: span.start,
                    end: span.end,
                    len,
                });
            }
            if span.entity_type.is_empty() || span.entity_type.chars().any(char::is_whitespace) {
                return Err(CorpusError::Parse {
                    line,
                    message: format!("invalid {which} entity type {:?}", span.entity_type),
                });
            }
        }
        if self.head.overlaps(&self.tail) {
            return Err(CorpusError::OverlappingSpans { line });
        }
        Ok(())
    }
}

/// Clipped signed distances `(to head start, to tail start)` for every token.
pub fn relative_positions(inst: &Instance, max_dist: usize) -> Vec<(i64, i64)> {
    let m = max_dist as i64;
    let (h, t) = (inst.head.start as i64, inst.tail.start as i64);
    (0..inst.tokens.len() as i64)
        .map(|i| ((i - h).clamp(-m, m), (i - t).clamp(-m, m)))
        .collect()
}

/// Token to id map. Id 0 is reserved for unknown tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_ID: usize = 0;

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::from_tokens(Vec::<String>::new())
    }
}

impl Vocabulary {
    /// Builds a vocabulary from tokens in first-seen order.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocabulary {
            tokens: vec![UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        v.index.insert(UNK_TOKEN.to_string(), UNK_ID);
        for t in tokens {
            let t = t.as_ref();
            if !v.index.contains_key(t) {
                v.index.insert(t.to_string(), v.tokens.len());
                v.tokens.push(t.to_string());
            }
        }
        v
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Restores the lookup table after deserialisation.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn save(&self, path: &Path) -> Result<(), crate::Error> {
        fs::write(path, serde_json::to_string(&self.tokens)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, crate::Error> {
        let tokens: Vec<String> = serde_json::from_str(&fs::read_to_string(path)?)?;
        let mut v = Vocabulary {
            tokens,
            index: HashMap::new(),
        };
        v.reindex();
        Ok(v)
    }
}

/// Immutable set of instances for one relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub instances: Vec<Instance>,
    pub vocabulary: Vocabulary,
    pub relation: String,
    positions: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness. Instances are assumed valid.
    pub fn from_instances(
        instances: Vec<Instance>,
        relation: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let mut positions = HashMap::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            if positions.insert(inst.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(inst.id.clone()));
            }
        }
        let vocabulary = Vocabulary::from_tokens(instances.iter().flat_map(|i| i.tokens.iter()));
        Ok(Corpus {
            instances,
            vocabulary,
            relation: relation.into(),
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.position(id).map(|i| &self.instances[i])
    }

    /// Sub-corpus of the given positions, in that order.
    pub fn subset(&self, positions: &[usize]) -> Corpus {
        let instances = positions
            .iter()
            .map(|&i| self.instances[i].clone())
            .collect();
        Corpus::from_instances(instances, self.relation.clone())
            .expect("subset of a valid corpus has unique ids")
    }

    pub fn ds_targets(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.ds_label.target()).collect()
    }
}

/// Parses JSONL records from a reader.
pub fn read_corpus<R: BufRead>(reader: R, max_len: usize) -> Result<Corpus, CorpusError> {
    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    let mut relation: Option<String> = None;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        inst.validate(line_no, max_len)?;
        match &relation {
            None => relation = Some(inst.relation.clone()),
            Some(r) if *r != inst.relation => {
                return Err(CorpusError::MixedRelation {
                    line: line_no,
                    expected: r.clone(),
                    found: inst.relation.clone(),
                })
            }
            _ => {}
        }
        if !seen.insert(inst.id.clone()) {
            return Err(CorpusError::DuplicateId(inst.id));
        }
        instances.push(inst);
    }
    Corpus::from_instances(instances, relation.unwrap_or_default())
}

/// Loads a JSONL corpus with the default sentence-length limit.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with_limit(path, DEFAULT_MAX_SENTENCE_LEN)
}

pub fn load_corpus_with_limit(path: &Path, max_len: usize) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path)?;
    read_corpus(BufReader::new(file), max_len)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut w: W) -> Result<(), CorpusError> {
    for inst in &corpus.instances {
        let line = serde_json::to_string(inst).expect("instances always serialise");
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let file = fs::File::create(path)?;
    write_corpus(corpus, std::io::BufWriter::new(file))
}
