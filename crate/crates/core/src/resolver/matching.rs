//! Non-exact candidate generation: part-multiset matching and edit distance.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::snapshot::{normalize_term, SnapshotIndex};

/// Which string a candidate query was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryKind {
    PmnX,
    DescriptorName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CandidateSource {
    PartialExact,
    PartialSuperset,
    EditDistance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub scr_ui: String,
    pub matched_term: String,
    pub source: CandidateSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_parts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<usize>,
    pub query: QueryKind,
}

/// Multiset of normalized term parts.
pub type PartBag = BTreeMap<String, usize>;

/// Lowercases a part and drops one plural `s` from alphabetic parts longer
/// than three characters.
pub fn normalize_part(part: &str) -> String {
    let mut folded = part.to_lowercase();
    if folded.chars().count() > 3
        && folded.chars().all(char::is_alphabetic)
        && folded.ends_with('s')
    {
        folded.pop();
    }
    folded
}

pub fn tokenize_parts(text: &str) -> PartBag {
    let mut bag = PartBag::new();
    for part in text.split(|c: char| !c.is_alphanumeric()) {
        if part.is_empty() {
            continue;
        }
        *bag.entry(normalize_part(part)).or_insert(0) += 1;
    }
    bag
}

fn bag_size(bag: &PartBag) -> usize {
    bag.values().sum()
}

/// `outer` contains every part of `inner` at least as often.
pub fn bag_contains(outer: &PartBag, inner: &PartBag) -> bool {
    inner
        .iter()
        .all(|(part, &n)| outer.get(part).is_some_and(|&m| m >= n))
}

/// Unit-cost edit distance over the case-folded inputs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.to_lowercase().chars().collect();
    let b: Vec<char> = b.to_lowercase().chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

// Lower is better: exact parts first, then fewer extra parts.
fn partial_rank(c: &Candidate) -> (u8, usize) {
    match c.source {
        CandidateSource::PartialExact => (0, 0),
        _ => (1, c.extra_parts.unwrap_or(0)),
    }
}

pub fn partial_match_candidates(
    queries: &[(QueryKind, String)],
    index: &SnapshotIndex,
) -> Vec<Candidate> {
    let query_bags: Vec<(QueryKind, PartBag)> = queries
        .iter()
        .map(|(kind, q)| (*kind, tokenize_parts(q)))
        .filter(|(_, bag)| !bag.is_empty())
        .collect();
    if query_bags.is_empty() {
        return Vec::new();
    }

    let mut best: BTreeMap<&str, Candidate> = BTreeMap::new();
    for (term, scr_ui) in &index.all_scr_terms {
        let term_bag = tokenize_parts(term);
        for (kind, query_bag) in &query_bags {
            if !bag_contains(&term_bag, query_bag) {
                continue;
            }
            let extra = bag_size(&term_bag) - bag_size(query_bag);
            let candidate = Candidate {
                scr_ui: scr_ui.clone(),
                matched_term: term.clone(),
                source: if extra == 0 {
                    CandidateSource::PartialExact
                } else {
                    CandidateSource::PartialSuperset
                },
                extra_parts: (extra > 0).then_some(extra),
                distance: None,
                query: *kind,
            };
            match best.entry(scr_ui.as_str()) {
                Entry::Vacant(slot) => {
                    slot.insert(candidate);
                }
                Entry::Occupied(mut slot) => {
                    if partial_rank(&candidate) < partial_rank(slot.get()) {
                        slot.insert(candidate);
                    }
                }
            }
        }
    }

    let mut out: Vec<Candidate> = best.into_values().collect();
    out.sort_by(|a, b| {
        partial_rank(a)
            .cmp(&partial_rank(b))
            .then_with(|| a.scr_ui.cmp(&b.scr_ui))
    });
    out
}

pub fn edit_distance_candidates(
    queries: &[(QueryKind, String)],
    index: &SnapshotIndex,
    k: usize,
) -> Vec<Candidate> {
    let queries: Vec<(QueryKind, String)> = queries
        .iter()
        .map(|(kind, q)| (*kind, normalize_term(q)))
        .filter(|(_, q)| !q.is_empty())
        .collect();
    if k == 0 || queries.is_empty() {
        return Vec::new();
    }

    let mut best: BTreeMap<&str, Candidate> = BTreeMap::new();
    for (term, scr_ui) in &index.all_scr_terms {
        for (kind, query) in &queries {
            let distance = levenshtein(query, term);
            if distance == 0 {
                continue;
            }
            let better = best
                .get(scr_ui.as_str())
                .is_none_or(|c| distance < c.distance.unwrap_or(usize::MAX));
            if better {
                best.insert(
                    scr_ui.as_str(),
                    Candidate {
                        scr_ui: scr_ui.clone(),
                        matched_term: term.clone(),
                        source: CandidateSource::EditDistance,
                        extra_parts: None,
                        distance: Some(distance),
                        query: *kind,
                    },
                );
            }
        }
    }

    let mut out: Vec<Candidate> = best.into_values().collect();
    out.sort_by(|a, b| a.distance.cmp(&b.distance).then_with(|| a.scr_ui.cmp(&b.scr_ui)));
    out.truncate(k);
    out
}
