use std::collections::HashMap;

use super::{Element, EntitySlot, Pattern};
use crate::corpus::{Corpus, Instance};

/// Token range an element may occupy in `inst`.
fn candidates(element: &Element, inst: &Instance) -> Vec<(usize, usize)> {
    match element {
        Element::Literal(tok) => inst
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| *t == tok)
            .map(|(i, _)| (i, i + 1))
            .collect(),
        Element::Entity { slot, entity_type } => {
            let span = match slot {
                EntitySlot::Head => &inst.head,
                EntitySlot::Tail => &inst.tail,
            };
            if &span.entity_type == entity_type {
                vec![(span.start, span.end)]
            } else {
                Vec::new()
            }
        }
    }
}

/// True iff some in-order placement of the pattern's elements fits `inst`
/// with every gap inside its bucket. Both ends are unanchored.
pub fn matches(p: &Pattern, inst: &Instance) -> bool {
    let elements = p.elements();
    // Ends of placements of the previous element that are reachable.
    let mut frontier: Vec<usize> = candidates(&elements[0], inst)
        .into_iter()
        .map(|(_, end)| end)
        .collect();
    for (k, element) in elements.iter().enumerate().skip(1) {
        if frontier.is_empty() {
            return false;
        }
        let gap = p.gaps()[k - 1];
        let mut next: Vec<usize> = candidates(element, inst)
            .into_iter()
            .filter(|&(start, _)| {
                frontier
                    .iter()
                    .any(|&prev_end| prev_end <= start && gap.contains(start - prev_end))
            })
            .map(|(_, end)| end)
            .collect();
        next.sort_unstable();
        next.dedup();
        frontier = next;
    }
    !frontier.is_empty()
}

/// Inverted index that narrows the instances a pattern can match before
/// running [`matches`] on each candidate.
pub struct MatchIndex<'c> {
    corpus: &'c Corpus,
    postings: HashMap<&'c str, Vec<usize>>,
}

impl<'c> MatchIndex<'c> {
    pub fn new(corpus: &'c Corpus) -> Self {
        let mut postings: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, inst) in corpus.instances.iter().enumerate() {
            for tok in &inst.tokens {
                let list = postings.entry(tok.as_str()).or_default();
                if list.last() != Some(&i) {
                    list.push(i);
                }
            }
        }
        MatchIndex { corpus, postings }
    }

    /// Sorted corpus positions of every instance matched by `p`.
    pub fn matching(&self, p: &Pattern) -> Vec<usize> {
        let mut lists: Vec<&Vec<usize>> = Vec::new();
        for lit in p.literals() {
            match self.postings.get(lit) {
                Some(list) => lists.push(list),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let candidates: Box<dyn Iterator<Item = usize>> = match lists.first() {
            Some(first) => Box::new(
                first
                    .iter()
                    .copied()
                    .filter(|i| lists[1..].iter().all(|l| l.binary_search(i).is_ok())),
            ),
            None => Box::new(0..self.corpus.len()),
        };
        candidates
            .filter(|&i| matches(p, &self.corpus.instances[i]))
            .collect()
    }
}
