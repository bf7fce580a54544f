//! Relational patterns: induction from agent actions, matching, aggregation
//! and the coverage hierarchy used to pick patterns for annotation.
//!
//! A pattern is a sequence of elements (literal tokens or typed entity
//! slots) separated by gap buckets. Its canonical text renders zero gaps as
//! plain adjacency and the other buckets as `PAD{1,3}`, `PAD{4,9}` and
//! `PAD{10,}`:
//!
//! ```text
//! ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY
//! ```

mod hierarchy;
mod matcher;

pub use hierarchy::{
    aggregate, build_hierarchy, read_pattern_table, select_top, write_pattern_table, Hierarchy,
    PatternEntry, PatternTable,
};
pub use matcher::{matches, MatchIndex};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::ActionSequence;
use crate::corpus::Instance;

#[derive(Debug, Error, PartialEq)]
pub enum PatternError {
    #[error("pattern has no elements")]
    Empty,
    #[error("pattern has {elements} elements but {gaps} gaps")]
    GapCount { elements: usize, gaps: usize },
    #[error("entity slot {0} appears more than once")]
    DuplicateSlot(u8),
    #[error("invalid token {0:?} in pattern")]
    InvalidToken(String),
    #[error("cannot parse pattern {text:?}: {reason}")]
    Parse { text: String, reason: String },
    #[error("action sequence has length {actions} but instance has {tokens} tokens")]
    LengthMismatch { actions: usize, tokens: usize },
}

/// Distance class between two adjacent pattern elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GapBucket {
    /// No intervening tokens.
    Zero,
    /// 1 to 3 tokens.
    Short,
    /// 4 to 9 tokens.
    Medium,
    /// 10 or more tokens.
    Long,
}

impl GapBucket {
    pub const ALL: [GapBucket; 4] = [
        GapBucket::Zero,
        GapBucket::Short,
        GapBucket::Medium,
        GapBucket::Long,
    ];

    /// Inclusive bounds; `None` upper bound means unbounded.
    pub fn bounds(self) -> (usize, Option<usize>) {
        match self {
            GapBucket::Zero => (0, Some(0)),
            GapBucket::Short => (1, Some(3)),
            GapBucket::Medium => (4, Some(9)),
            GapBucket::Long => (10, None),
        }
    }

    pub fn contains(self, n: usize) -> bool {
        let (lo, hi) = self.bounds();
        n >= lo && hi.is_none_or(|h| n <= h)
    }

    fn pad_token(self) -> Option<&'static str> {
        match self {
            GapBucket::Zero => None,
            GapBucket::Short => Some("PAD{1,3}"),
            GapBucket::Medium => Some("PAD{4,9}"),
            GapBucket::Long => Some("PAD{10,}"),
        }
    }

    fn from_pad_token(tok: &str) -> Option<Self> {
        match tok {
            "PAD{1,3}" => Some(GapBucket::Short),
            "PAD{4,9}" => Some(GapBucket::Medium),
            "PAD{10,}" => Some(GapBucket::Long),
            _ => None,
        }
    }
}

/// Bucket for `n` intervening tokens.
pub fn gap_bucket(n: usize) -> GapBucket {
    match n {
        0 => GapBucket::Zero,
        1..=3 => GapBucket::Short,
        4..=9 => GapBucket::Medium,
        _ => GapBucket::Long,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntitySlot {
    Head,
    Tail,
}

impl EntitySlot {
    pub fn number(self) -> u8 {
        match self {
            EntitySlot::Head => 1,
            EntitySlot::Tail => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Literal(String),
    Entity {
        slot: EntitySlot,
        entity_type: String,
    },
}

impl Element {
    fn render(&self, out: &mut String) {
        match self {
            Element::Literal(tok) => {
                if needs_escape(tok) {
                    out.push('\\');
                }
                out.push_str(tok);
            }
            Element::Entity { slot, entity_type } => {
                out.push_str("ENTITY");
                out.push(char::from(b'0' + slot.number()));
                out.push(':');
                out.push_str(entity_type);
            }
        }
    }
}

fn needs_escape(tok: &str) -> bool {
    tok.starts_with('\\')
        || tok.starts_with("ENTITY1:")
        || tok.starts_with("ENTITY2:")
        || tok.starts_with("PAD{")
}

fn valid_token(tok: &str) -> bool {
    !tok.is_empty() && !tok.chars().any(char::is_whitespace)
}

/// Alternating sequence of elements and gap buckets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    elements: Vec<Element>,
    gaps: Vec<GapBucket>,
    text: String,
}

impl Pattern {
    pub fn new(elements: Vec<Element>, gaps: Vec<GapBucket>) -> Result<Self, PatternError> {
        if elements.is_empty() {
            return Err(PatternError::Empty);
        }
        if gaps.len() + 1 != elements.len() {
            return Err(PatternError::GapCount {
                elements: elements.len(),
                gaps: gaps.len(),
            });
        }
        let mut seen = [false; 2];
        for e in &elements {
            match e {
                Element::Literal(tok) if !valid_token(tok) => {
                    return Err(PatternError::InvalidToken(tok.clone()))
                }
                Element::Entity { slot, entity_type } => {
                    if !valid_token(entity_type) {
                        return Err(PatternError::InvalidToken(entity_type.clone()));
                    }
                    let k = slot.number() as usize - 1;
                    if seen[k] {
                        return Err(PatternError::DuplicateSlot(slot.number()));
                    }
                    seen[k] = true;
                }
                _ => {}
            }
        }
        let mut text = String::new();
        for (i, e) in elements.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                if let Some(pad) = gaps[i - 1].pad_token() {
                    text.push_str(pad);
                    text.push(' ');
                }
            }
            e.render(&mut text);
        }
        Ok(Pattern {
            elements,
            gaps,
            text,
        })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn gaps(&self) -> &[GapBucket] {
        &self.gaps
    }

    pub fn canonical_text(&self) -> &str {
        &self.text
    }

    pub fn has_entity(&self) -> bool {
        self.elements
            .iter()
            .any(|e| matches!(e, Element::Entity { .. }))
    }

    pub fn literals(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(|e| match e {
            Element::Literal(t) => Some(t.as_str()),
            _ => None,
        })
    }

    pub fn entity(&self, slot: EntitySlot) -> Option<&str> {
        self.elements.iter().find_map(|e| match e {
            Element::Entity {
                slot: s,
                entity_type,
            } if *s == slot => Some(entity_type.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl PartialOrd for Pattern {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pattern {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.text.cmp(&other.text)
    }
}

impl FromStr for Pattern {
    type Err = PatternError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| PatternError::Parse {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let mut elements = Vec::new();
        let mut gaps = Vec::new();
        let mut pending_gap: Option<GapBucket> = None;
        for tok in text.split_whitespace() {
            if let Some(bucket) = GapBucket::from_pad_token(tok) {
                if elements.is_empty() {
                    return Err(err("pattern starts with a gap"));
                }
                if pending_gap.is_some() {
                    return Err(err("two consecutive gaps"));
                }
                pending_gap = Some(bucket);
                continue;
            }
            if tok.starts_with("PAD{") {
                return Err(err("unknown gap token"));
            }
            let element = if let Some(rest) = tok.strip_prefix('\\') {
                Element::Literal(rest.to_string())
            } else if let Some(ty) = tok.strip_prefix("ENTITY1:") {
                Element::Entity {
                    slot: EntitySlot::Head,
                    entity_type: ty.to_string(),
                }
            } else if let Some(ty) = tok.strip_prefix("ENTITY2:") {
                Element::Entity {
                    slot: EntitySlot::Tail,
                    entity_type: ty.to_string(),
                }
            } else {
                Element::Literal(tok.to_string())
            };
            if !elements.is_empty() {
                gaps.push(pending_gap.take().unwrap_or(GapBucket::Zero));
            }
            elements.push(element);
        }
        if pending_gap.is_some() {
            return Err(err("pattern ends with a gap"));
        }
        let p = Pattern::new(elements, gaps)?;
        Ok(p)
    }
}

impl Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Builds the pattern for one instance from the agent's retain/erase actions.
///
/// Both entity spans are always kept and rendered as typed slots; every
/// other retained token becomes a literal.
pub fn induce(inst: &Instance, actions: &ActionSequence) -> Result<Pattern, PatternError> {
    if actions.len() != inst.tokens.len() {
        return Err(PatternError::LengthMismatch {
            actions: actions.len(),
            tokens: inst.tokens.len(),
        });
    }
    let mut segments: Vec<(usize, usize, Element)> = vec![
        (
            inst.head.start,
            inst.head.end,
            Element::Entity {
                slot: EntitySlot::Head,
                entity_type: inst.head.entity_type.clone(),
            },
        ),
        (
            inst.tail.start,
            inst.tail.end,
            Element::Entity {
                slot: EntitySlot::Tail,
                entity_type: inst.tail.entity_type.clone(),
            },
        ),
    ];
    for (i, tok) in inst.tokens.iter().enumerate() {
        if actions.retains(i) && !inst.head.contains(i) && !inst.tail.contains(i) {
            segments.push((i, i + 1, Element::Literal(tok.clone())));
        }
    }
    segments.sort_by_key(|s| s.0);
    let gaps = segments
        .windows(2)
        .map(|w| gap_bucket(w[1].0 - w[0].1))
        .collect();
    Pattern::new(segments.into_iter().map(|s| s.2).collect(), gaps)
}
