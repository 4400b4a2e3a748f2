//! Linking new descriptors to the supplementary concept record they were
//! promoted from.
//!
//! The cascade runs, per descriptor, against the snapshot of the year before
//! its introduction: category-1 filtering, concept identifier comparison,
//! exact lookup of the note's `X` term, exact lookup of the descriptor name,
//! and finally candidate generation for human review.

mod matching;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pmn::{matches_indexed_pattern, parse_pmn, HostMention, PmnParse};
use crate::review::AppliedDecision;
use crate::snapshot::{DescriptorRecord, SnapshotIndex, SnapshotSet};

pub use matching::{
    bag_contains, edit_distance_candidates, levenshtein, normalize_part, partial_match_candidates,
    tokenize_parts, Candidate, CandidateSource, PartBag, QueryKind,
};

pub const DEFAULT_CANDIDATE_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("descriptor concepts match several SCRs: {}", .0.join(", "))]
    AmbiguousConceptMatch(Vec<String>),
    #[error("term matches several SCRs: {}", .0.join(", "))]
    AmbiguousTermMatch(Vec<String>),
    #[error("empty query term")]
    EmptyQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("missing snapshot for year {0}")]
    MissingSnapshot(i32),
    #[error("invalid year range {0}-{1}")]
    InvalidRange(i32, i32),
    #[error("candidate count must be at least 1")]
    InvalidCandidateCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResolutionMethod {
    PreferredConcept,
    PmnTermExact,
    DescriptorNameExact,
    ManualSelection,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub descriptor_ui: String,
    pub scr_ui: Option<String>,
    pub method: ResolutionMethod,
    pub also_matched_by_name: bool,
    /// The SCR term or concept UI that produced the link.
    #[serde(default)]
    pub matched_term: Option<String>,
}

impl Resolution {
    pub fn unresolved(descriptor_ui: &str) -> Self {
        Resolution {
            descriptor_ui: descriptor_ui.to_string(),
            scr_ui: None,
            method: ResolutionMethod::Unresolved,
            also_matched_by_name: false,
            matched_term: None,
        }
    }

    fn found(descriptor_ui: &str, scr_ui: &str, method: ResolutionMethod, matched: &str) -> Self {
        Resolution {
            descriptor_ui: descriptor_ui.to_string(),
            scr_ui: Some(scr_ui.to_string()),
            method,
            also_matched_by_name: false,
            matched_term: Some(matched.to_string()),
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.scr_ui.is_some()
    }
}

/// A recoverable oddity met while resolving one descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OutcomeWarning {
    AmbiguousConcept { scrs: Vec<String> },
    AmbiguousTerm { query: QueryKind, scrs: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorOutcome {
    pub descriptor_ui: String,
    pub descriptor_name: String,
    pub year_introduced: i32,
    pub pmn_text: Option<String>,
    pub category1: bool,
    pub pattern_matched: bool,
    pub parse: Option<PmnParse>,
    pub resolution: Resolution,
    pub candidates: Vec<Candidate>,
    pub pmn_hosts: Vec<HostMention>,
    /// Descriptors the linked SCR was mapped to, when resolved by the pipeline.
    pub previous_hosts: Vec<String>,
    pub warnings: Vec<OutcomeWarning>,
    /// Set once a reviewer decision has been applied.
    #[serde(default)]
    pub decision: Option<AppliedDecision>,
}

impl DescriptorOutcome {
    /// Pattern-matched, not linked by concept identifiers.
    pub fn in_pmn_remainder(&self) -> bool {
        self.pattern_matched && self.resolution.method != ResolutionMethod::PreferredConcept
    }

    /// Reached candidate generation: no exact strategy produced a link.
    pub fn reached_candidate_stage(&self) -> bool {
        self.in_pmn_remainder()
            && matches!(
                self.resolution.method,
                ResolutionMethod::Unresolved | ResolutionMethod::ManualSelection
            )
    }

    pub fn x_text(&self) -> Option<&str> {
        self.parse
            .as_ref()
            .and_then(|p| p.clauses.first())
            .map(|c| c.x_text.as_str())
            .filter(|x| !x.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub range: [i32; 2],
    pub outcomes: Vec<DescriptorOutcome>,
}

impl AnalysisResult {
    pub fn outcome(&self, descriptor_ui: &str) -> Option<&DescriptorOutcome> {
        self.outcomes
            .binary_search_by(|o| o.descriptor_ui.as_str().cmp(descriptor_ui))
            .ok()
            .map(|i| &self.outcomes[i])
    }

    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("analysis serialization");
        json.push('\n');
        json
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let mut analysis: AnalysisResult = serde_json::from_str(text)?;
        analysis
            .outcomes
            .sort_by(|a, b| a.descriptor_ui.cmp(&b.descriptor_ui));
        Ok(analysis)
    }
}

pub fn detect_category1(descriptor: &DescriptorRecord, previous: &SnapshotIndex) -> bool {
    descriptor
        .preferred_concept()
        .is_some_and(|c| previous.subordinate_concepts.contains(&c.ui))
}

/// Links through shared concept identifiers. The descriptor's preferred
/// concept is tried first, then its subordinate concepts.
pub fn resolve_by_concept(
    descriptor: &DescriptorRecord,
    previous: &SnapshotIndex,
) -> Result<Option<Resolution>, ResolveError> {
    for tier in [true, false] {
        let hits: BTreeMap<&str, &str> = descriptor
            .concepts
            .iter()
            .filter(|c| c.preferred == tier)
            .filter_map(|c| {
                previous
                    .concept_to_scr
                    .get(&c.ui)
                    .map(|scr| (scr.as_str(), c.ui.as_str()))
            })
            .collect();
        match hits.len() {
            0 => continue,
            1 => {
                let (scr, concept) = hits.into_iter().next().unwrap();
                return Ok(Some(Resolution::found(
                    &descriptor.ui,
                    scr,
                    ResolutionMethod::PreferredConcept,
                    concept,
                )));
            }
            _ => {
                return Err(ResolveError::AmbiguousConceptMatch(
                    hits.keys().map(|s| s.to_string()).collect(),
                ))
            }
        }
    }
    Ok(None)
}

fn resolve_exact(
    descriptor_ui: &str,
    query: &str,
    previous: &SnapshotIndex,
    method: ResolutionMethod,
) -> Result<Option<Resolution>, ResolveError> {
    if query.trim().is_empty() {
        return Err(ResolveError::EmptyQuery);
    }
    let hits = previous.lookup_scrs_by_term(query);
    match hits.len() {
        0 => Ok(None),
        1 => {
            let scr = hits.iter().next().unwrap();
            Ok(Some(Resolution::found(
                descriptor_ui,
                scr,
                method,
                &crate::snapshot::normalize_term(query),
            )))
        }
        _ => Err(ResolveError::AmbiguousTermMatch(hits.into_iter().collect())),
    }
}

/// Exact lookup of the note's `X` term among all SCR terms.
pub fn resolve_by_term(
    descriptor_ui: &str,
    x_text: &str,
    previous: &SnapshotIndex,
) -> Result<Option<Resolution>, ResolveError> {
    resolve_exact(descriptor_ui, x_text, previous, ResolutionMethod::PmnTermExact)
}

pub fn resolve_by_name(
    descriptor: &DescriptorRecord,
    previous: &SnapshotIndex,
) -> Result<Option<Resolution>, ResolveError> {
    resolve_exact(
        &descriptor.ui,
        &descriptor.name,
        previous,
        ResolutionMethod::DescriptorNameExact,
    )
}

fn ambiguity_warning(err: ResolveError, query: QueryKind) -> Option<OutcomeWarning> {
    match err {
        ResolveError::AmbiguousConceptMatch(scrs) => Some(OutcomeWarning::AmbiguousConcept { scrs }),
        ResolveError::AmbiguousTermMatch(scrs) => Some(OutcomeWarning::AmbiguousTerm { query, scrs }),
        ResolveError::EmptyQuery => None,
    }
}

/// Runs the full cascade for one descriptor against its previous-year index.
pub fn resolve_descriptor(
    descriptor: &DescriptorRecord,
    previous: &SnapshotIndex,
    k: usize,
) -> DescriptorOutcome {
    let mut outcome = DescriptorOutcome {
        descriptor_ui: descriptor.ui.clone(),
        descriptor_name: descriptor.name.clone(),
        year_introduced: descriptor.year_introduced,
        pmn_text: descriptor.public_mesh_note.clone(),
        category1: false,
        pattern_matched: false,
        parse: None,
        resolution: Resolution::unresolved(&descriptor.ui),
        candidates: Vec::new(),
        pmn_hosts: Vec::new(),
        previous_hosts: Vec::new(),
        warnings: Vec::new(),
        decision: None,
    };

    if detect_category1(descriptor, previous) {
        outcome.category1 = true;
        return outcome;
    }

    let pmn = descriptor.public_mesh_note.as_deref().unwrap_or("");
    outcome.pattern_matched = matches_indexed_pattern(pmn);
    if outcome.pattern_matched {
        let parse = parse_pmn(pmn);
        outcome.pmn_hosts = parse.hosts().cloned().collect();
        outcome.parse = Some(parse);
    }

    match resolve_by_concept(descriptor, previous) {
        Ok(Some(resolution)) => {
            outcome.resolution = resolution;
        }
        Ok(None) => {}
        Err(err) => outcome
            .warnings
            .extend(ambiguity_warning(err, QueryKind::DescriptorName)),
    }

    if !outcome.resolution.is_resolved() && outcome.pattern_matched {
        let x_text = outcome.x_text().map(str::to_string);
        let by_name = || match resolve_by_name(descriptor, previous) {
            Ok(found) => (found, None),
            Err(err) => (None, ambiguity_warning(err, QueryKind::DescriptorName)),
        };

        let mut by_term = None;
        if let Some(x) = &x_text {
            match resolve_by_term(&descriptor.ui, x, previous) {
                Ok(found) => by_term = found,
                Err(err) => outcome.warnings.extend(ambiguity_warning(err, QueryKind::PmnX)),
            }
        }

        let (name_hit, name_warning) = by_name();
        if let Some(mut term_hit) = by_term {
            term_hit.also_matched_by_name =
                name_hit.is_some_and(|n| n.scr_ui == term_hit.scr_ui);
            outcome.resolution = term_hit;
        } else {
            outcome.warnings.extend(name_warning);
            if let Some(name_hit) = name_hit {
                outcome.resolution = name_hit;
            } else {
                let mut queries = Vec::with_capacity(2);
                if let Some(x) = x_text {
                    queries.push((QueryKind::PmnX, x));
                }
                queries.push((QueryKind::DescriptorName, descriptor.name.clone()));
                outcome.candidates = partial_match_candidates(&queries, previous);
                outcome
                    .candidates
                    .extend(edit_distance_candidates(&queries, previous, k));
            }
        }
    }

    if let Some(scr) = &outcome.resolution.scr_ui {
        outcome.previous_hosts = previous.hosts_of(scr).map(<[_]>::to_vec).unwrap_or_default();
    }
    outcome
}

/// Resolves every descriptor of the end-year snapshot introduced within
/// `range` (inclusive). Outcomes are ordered by descriptor UI.
pub fn run_pipeline(
    snapshots: &SnapshotSet,
    range: [i32; 2],
    k: usize,
) -> Result<AnalysisResult, PipelineError> {
    let [start, end] = range;
    if start > end {
        return Err(PipelineError::InvalidRange(start, end));
    }
    if k == 0 {
        return Err(PipelineError::InvalidCandidateCount);
    }
    let universe = snapshots.get(&end).ok_or(PipelineError::MissingSnapshot(end))?;

    let mut new_descriptors: Vec<&DescriptorRecord> = universe
        .snapshot
        .descriptors
        .iter()
        .filter(|d| (start..=end).contains(&d.year_introduced))
        .collect();
    new_descriptors.sort_by(|a, b| a.ui.cmp(&b.ui));

    let needed: BTreeSet<i32> = new_descriptors.iter().map(|d| d.year_introduced - 1).collect();
    if let Some(year) = needed.iter().find(|y| !snapshots.contains_key(y)) {
        return Err(PipelineError::MissingSnapshot(*year));
    }

    let outcomes = new_descriptors
        .par_iter()
        .map(|d| resolve_descriptor(d, &snapshots[&(d.year_introduced - 1)].index, k))
        .collect();
    Ok(AnalysisResult { range, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::{build_index, ConceptRecord, ScrRecord, Snapshot};

    fn concept(ui: &str, preferred: bool) -> ConceptRecord {
        ConceptRecord {
            ui: ui.into(),
            preferred,
            terms: vec![ui.to_lowercase()],
        }
    }

    fn descriptor(ui: &str, name: &str, concepts: Vec<ConceptRecord>) -> DescriptorRecord {
        DescriptorRecord {
            ui: ui.into(),
            name: name.into(),
            year_introduced: 2014,
            public_mesh_note: None,
            concepts,
        }
    }

    fn scr(ui: &str, concept_ui: &str, terms: &[&str]) -> ScrRecord {
        ScrRecord {
            ui: ui.into(),
            name: terms[0].into(),
            concepts: vec![ConceptRecord {
                ui: concept_ui.into(),
                preferred: true,
                terms: terms.iter().map(|t| t.to_string()).collect(),
            }],
            mapped_to: vec!["D000001".into()],
        }
    }

    #[test]
    fn category1_requires_subordinate_position() {
        let mut prev = Snapshot::empty(2013);
        prev.descriptors.push(descriptor(
            "D000100",
            "Host",
            vec![concept("M0H", true), concept("M0A", false)],
        ));
        let index = build_index(&prev).unwrap();
        let sub = descriptor("D000200", "New", vec![concept("M0A", true)]);
        assert!(detect_category1(&sub, &index));
        let pref = descriptor("D000201", "New", vec![concept("M0H", true)]);
        assert!(!detect_category1(&pref, &index));
        let absent = descriptor("D000202", "New", vec![concept("M0Z", true)]);
        assert!(!detect_category1(&absent, &index));
    }

    #[test]
    fn concept_resolution() {
        let mut prev = Snapshot::empty(2013);
        prev.scrs.push(scr("C000200", "M0B", &["b"]));
        prev.scrs.push(scr("C000300", "M0C", &["c"]));
        prev.scrs.push(scr("C000400", "M0D", &["d"]));
        let index = build_index(&prev).unwrap();

        let d = descriptor("D000001", "x", vec![concept("M0B", true), concept("M0C", false)]);
        let r = resolve_by_concept(&d, &index).unwrap().unwrap();
        assert_eq!(r.scr_ui.as_deref(), Some("C000200"));
        assert_eq!(r.method, ResolutionMethod::PreferredConcept);

        let none = descriptor("D000002", "x", vec![concept("M0Q", true)]);
        assert_eq!(resolve_by_concept(&none, &index).unwrap(), None);

        let ambiguous = descriptor(
            "D000003",
            "x",
            vec![concept("M0Q", true), concept("M0C", false), concept("M0D", false)],
        );
        assert_eq!(
            resolve_by_concept(&ambiguous, &index),
            Err(ResolveError::AmbiguousConceptMatch(vec![
                "C000300".into(),
                "C000400".into()
            ]))
        );
    }

    #[test]
    fn term_and_name_resolution() {
        let mut prev = Snapshot::empty(2013);
        prev.scrs.push(scr("C000777", "M1", &["CD124 antigens"]));
        prev.scrs.push(scr("C000555", "M2", &["calbindin 2"]));
        prev.scrs.push(scr("C000801", "M3", &["shared"]));
        prev.scrs.push(scr("C000802", "M4", &["shared"]));
        let index = build_index(&prev).unwrap();

        let r = resolve_by_term("D053662", "CD124 ANTIGENS", &index).unwrap().unwrap();
        assert_eq!(r.scr_ui.as_deref(), Some("C000777"));
        assert_eq!(r.method, ResolutionMethod::PmnTermExact);
        assert_eq!(resolve_by_term("D1", "", &index), Err(ResolveError::EmptyQuery));
        assert_eq!(resolve_by_term("D1", "nothing", &index), Ok(None));

        let d = descriptor("D064032", "Calbindin 2", vec![concept("M9", true)]);
        let r = resolve_by_name(&d, &index).unwrap().unwrap();
        assert_eq!(r.scr_ui.as_deref(), Some("C000555"));
        assert_eq!(r.method, ResolutionMethod::DescriptorNameExact);

        let shared = descriptor("D000009", "Shared", vec![concept("M8", true)]);
        assert!(matches!(
            resolve_by_name(&shared, &index),
            Err(ResolveError::AmbiguousTermMatch(v)) if v.len() == 2
        ));
    }

    #[test]
    fn pipeline_requires_previous_snapshot() {
        let mut universe = Snapshot::empty(2014);
        universe
            .descriptors
            .push(descriptor("D000001", "x", vec![concept("M1", true)]));
        let mut set = SnapshotSet::new();
        set.insert(2014, crate::snapshot::IndexedSnapshot::new(universe).unwrap());
        assert_eq!(
            run_pipeline(&set, [2014, 2014], 5),
            Err(PipelineError::MissingSnapshot(2013))
        );
        assert_eq!(
            run_pipeline(&set, [2015, 2014], 5),
            Err(PipelineError::InvalidRange(2015, 2014))
        );
        assert_eq!(
            run_pipeline(&set, [2013, 2015], 5),
            Err(PipelineError::MissingSnapshot(2015))
        );
    }
}
