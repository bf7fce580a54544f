use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{induce, MatchIndex, Pattern, PatternError};
use crate::agent::ActionSequence;
use crate::corpus::{Corpus, Instance};
use crate::Error;

/// A stored pattern with its induction count and the corpus positions it
/// matches.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternEntry {
    pub pattern: Pattern,
    pub induction_count: usize,
    /// Sorted positions into the working corpus.
    pub matched: Vec<usize>,
}

impl PatternEntry {
    pub fn matched_ids<'c>(&self, corpus: &'c Corpus) -> Vec<&'c str> {
        self.matched
            .iter()
            .map(|&i| corpus.instances[i].id.as_str())
            .collect()
    }
}

/// Patterns keyed by canonical text.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatternTable {
    pub entries: BTreeMap<String, PatternEntry>,
}

impl PatternTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&PatternEntry> {
        self.entries.get(text)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PatternEntry> {
        self.entries.values()
    }

    /// Entries ordered by induction count descending, then text ascending.
    pub fn ranked(&self) -> Vec<&PatternEntry> {
        let mut v: Vec<&PatternEntry> = self.entries.values().collect();
        v.sort_by(|a, b| rank_cmp(a, b));
        v
    }
}

fn rank_cmp(a: &PatternEntry, b: &PatternEntry) -> std::cmp::Ordering {
    b.induction_count
        .cmp(&a.induction_count)
        .then_with(|| a.pattern.canonical_text().cmp(b.pattern.canonical_text()))
}

/// Merges the patterns induced from every extraction and matches each
/// distinct pattern against the whole corpus. Patterns without any entity
/// slot are dropped.
pub fn aggregate<'a, I>(extractions: I, corpus: &Corpus) -> Result<PatternTable, PatternError>
where
    I: IntoIterator<Item = (&'a Instance, &'a ActionSequence)>,
{
    let mut counts: BTreeMap<String, (Pattern, usize)> = BTreeMap::new();
    for (inst, actions) in extractions {
        let p = induce(inst, actions)?;
        if !p.has_entity() {
            continue;
        }
        counts
            .entry(p.canonical_text().to_string())
            .or_insert_with(|| (p, 0))
            .1 += 1;
    }
    let index = MatchIndex::new(corpus);
    let entries = counts
        .into_iter()
        .map(|(text, (pattern, induction_count))| {
            let matched = index.matching(&pattern);
            (
                text,
                PatternEntry {
                    pattern,
                    induction_count,
                    matched,
                },
            )
        })
        .collect();
    Ok(PatternTable { entries })
}

/// Extensional coverage relation between stored patterns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Hierarchy {
    /// parent -> children whose matched set is strictly contained in the parent's.
    pub children: BTreeMap<String, BTreeSet<String>>,
    /// Patterns with the same matched set as a better-ranked pattern, mapped
    /// to that representative.
    pub duplicates: BTreeMap<String, String>,
}

impl Hierarchy {
    pub fn is_omitted(&self, text: &str) -> bool {
        self.duplicates.contains_key(text) || self.children.values().any(|c| c.contains(text))
    }

    fn omitted(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.duplicates.keys().map(String::as_str).collect();
        for c in self.children.values() {
            out.extend(c.iter().map(String::as_str));
        }
        out
    }
}

fn is_subset(small: &[usize], large: &[usize]) -> bool {
    let mut j = 0;
    for &x in small {
        while j < large.len() && large[j] < x {
            j += 1;
        }
        if j == large.len() || large[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

pub fn build_hierarchy(table: &PatternTable) -> Hierarchy {
    let entries: Vec<&PatternEntry> = table.entries.values().collect();
    // instance position -> entries matching it
    let mut by_instance: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, e) in entries.iter().enumerate() {
        for &i in &e.matched {
            by_instance.entry(i).or_default().push(k);
        }
    }
    let mut h = Hierarchy::default();
    for (c, child) in entries.iter().enumerate() {
        let Some(first) = child.matched.first() else {
            continue;
        };
        for &p in &by_instance[first] {
            if p == c {
                continue;
            }
            let parent = entries[p];
            if parent.matched.len() < child.matched.len()
                || !is_subset(&child.matched, &parent.matched)
            {
                continue;
            }
            let (ct, pt) = (
                child.pattern.canonical_text(),
                parent.pattern.canonical_text(),
            );
            if parent.matched.len() > child.matched.len() {
                h.children
                    .entry(pt.to_string())
                    .or_default()
                    .insert(ct.to_string());
            } else if rank_cmp(parent, child).is_lt() {
                // Equal sets: keep the best-ranked one as representative.
                let rep = h
                    .duplicates
                    .entry(ct.to_string())
                    .or_insert_with(|| pt.to_string());
                if rank_cmp(parent, &table.entries[rep.as_str()]).is_lt() {
                    *rep = pt.to_string();
                }
            }
        }
    }
    h
}

/// The `n_r` best-ranked patterns not covered by another stored pattern.
pub fn select_top(table: &PatternTable, hierarchy: &Hierarchy, n_r: usize) -> Vec<Pattern> {
    let omitted = hierarchy.omitted();
    table
        .ranked()
        .into_iter()
        .filter(|e| !e.matched.is_empty() && !omitted.contains(e.pattern.canonical_text()))
        .take(n_r)
        .map(|e| e.pattern.clone())
        .collect()
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    pattern: Pattern,
    induction_count: usize,
    matched_ids: Vec<String>,
}

/// Writes one canonical text per line (ranked) plus a JSON stats sidecar.
pub fn write_pattern_table(
    table: &PatternTable,
    corpus: &Corpus,
    text_path: &Path,
    json_path: &Path,
) -> Result<(), Error> {
    let ranked = table.ranked();
    let mut text = String::new();
    for e in &ranked {
        text.push_str(e.pattern.canonical_text());
        text.push('\n');
    }
    fs::write(text_path, text)?;
    let records: Vec<EntryRecord> = ranked
        .iter()
        .map(|e| EntryRecord {
            pattern: e.pattern.clone(),
            induction_count: e.induction_count,
            matched_ids: e
                .matched_ids(corpus)
                .into_iter()
                .map(String::from)
                .collect(),
        })
        .collect();
    fs::write(json_path, serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

pub fn read_pattern_table(json_path: &Path, corpus: &Corpus) -> Result<PatternTable, Error> {
    let records: Vec<EntryRecord> = serde_json::from_str(&fs::read_to_string(json_path)?)?;
    let mut entries = BTreeMap::new();
    for r in records {
        let mut matched = r
            .matched_ids
            .iter()
            .map(|id| {
                corpus
                    .position(id)
                    .ok_or_else(|| Error::UnknownInstance(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        matched.sort_unstable();
        entries.insert(
            r.pattern.canonical_text().to_string(),
            PatternEntry {
                pattern: r.pattern,
                induction_count: r.induction_count,
                matched,
            },
        );
    }
    Ok(PatternTable { entries })
}
