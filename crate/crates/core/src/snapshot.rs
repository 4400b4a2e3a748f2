//! Yearly thesaurus snapshots: loading, validation and lookup indices.
//!
//! A snapshot is one year's frozen view of the thesaurus, stored as a
//! normalized JSON document. Snapshots are immutable once loaded; every
//! downstream stage works against a [`SnapshotIndex`] built from one.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_SNAPSHOT_YEAR: i32 = 1960;
pub const MAX_SNAPSHOT_YEAR: i32 = 2100;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot read snapshot file {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed snapshot JSON at line {line}, column {column}: {message}")]
    MalformedJson {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invariant violated by {ui}: {rule}")]
    InvariantViolation { ui: String, rule: &'static str },
    #[error("concept {0} is owned by more than one record of the same kind")]
    DuplicateConceptOwner(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptRecord {
    pub ui: String,
    pub preferred: bool,
    /// The first term is the concept's preferred term.
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorRecord {
    pub ui: String,
    pub name: String,
    pub year_introduced: i32,
    #[serde(default)]
    pub public_mesh_note: Option<String>,
    pub concepts: Vec<ConceptRecord>,
}

impl DescriptorRecord {
    pub fn preferred_concept(&self) -> Option<&ConceptRecord> {
        self.concepts.iter().find(|c| c.preferred)
    }
}

/// Supplementary concept record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrRecord {
    pub ui: String,
    pub name: String,
    pub concepts: Vec<ConceptRecord>,
    /// Descriptors this record was indexed under.
    pub mapped_to: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub year: i32,
    pub descriptors: Vec<DescriptorRecord>,
    pub scrs: Vec<ScrRecord>,
}

fn is_ui(ui: &str, prefix: char) -> bool {
    let mut chars = ui.chars();
    if chars.next() != Some(prefix) {
        return false;
    }
    let digits = chars.as_str();
    (digits.len() == 6 || digits.len() == 9) && digits.bytes().all(|b| b.is_ascii_digit())
}

pub fn is_descriptor_ui(ui: &str) -> bool {
    is_ui(ui, 'D')
}

pub fn is_scr_ui(ui: &str) -> bool {
    is_ui(ui, 'C')
}

fn violation(ui: &str, rule: &'static str) -> SnapshotError {
    SnapshotError::InvariantViolation {
        ui: ui.to_string(),
        rule,
    }
}

fn check_concepts(owner: &str, concepts: &[ConceptRecord]) -> Result<(), SnapshotError> {
    if concepts.iter().filter(|c| c.preferred).count() != 1 {
        return Err(violation(owner, "one-preferred-concept"));
    }
    for concept in concepts {
        if concept.terms.is_empty() {
            return Err(violation(&concept.ui, "non-empty-terms"));
        }
    }
    Ok(())
}

impl Snapshot {
    pub fn empty(year: i32) -> Self {
        Snapshot {
            year,
            descriptors: Vec::new(),
            scrs: Vec::new(),
        }
    }

    /// Checks every record-level invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), SnapshotError> {
        if !(MIN_SNAPSHOT_YEAR..=MAX_SNAPSHOT_YEAR).contains(&self.year) {
            return Err(violation(&self.year.to_string(), "year-range"));
        }
        let mut seen = HashSet::new();
        for d in &self.descriptors {
            if !is_descriptor_ui(&d.ui) {
                return Err(violation(&d.ui, "ui-pattern"));
            }
            if !seen.insert(d.ui.as_str()) {
                return Err(violation(&d.ui, "unique-ui"));
            }
            if d.name.trim().is_empty() {
                return Err(violation(&d.ui, "non-empty-name"));
            }
            check_concepts(&d.ui, &d.concepts)?;
        }
        for s in &self.scrs {
            if !is_scr_ui(&s.ui) {
                return Err(violation(&s.ui, "ui-pattern"));
            }
            if !seen.insert(s.ui.as_str()) {
                return Err(violation(&s.ui, "unique-ui"));
            }
            if s.name.trim().is_empty() {
                return Err(violation(&s.ui, "non-empty-name"));
            }
            check_concepts(&s.ui, &s.concepts)?;
            if s.mapped_to.iter().any(|h| !is_descriptor_ui(h)) {
                return Err(violation(&s.ui, "mapped-to-pattern"));
            }
        }
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Self, SnapshotError> {
        let snapshot: Snapshot =
            serde_json::from_str(json).map_err(|e| SnapshotError::MalformedJson {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        snapshot.validate()?;
        Ok(snapshot)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialization is infallible")
    }
}

/// Reads and validates one snapshot file.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Snapshot, SnapshotError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SnapshotError::FileUnreadable {
        path: path.to_path_buf(),
        source,
    })?;
    Snapshot::from_json_str(&text)
}

/// Case-fold, collapse internal whitespace runs to one space, trim.
pub fn normalize_term(term: &str) -> String {
    let mut out = String::with_capacity(term.len());
    for word in term.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out.to_lowercase()
}

/// Read-only lookup structures over one snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SnapshotIndex {
    pub year: i32,
    pub term_to_scrs: BTreeMap<String, BTreeSet<String>>,
    pub concept_to_scr: BTreeMap<String, String>,
    pub concept_to_descriptor: BTreeMap<String, String>,
    /// Concepts held by a descriptor in a non-preferred position.
    pub subordinate_concepts: BTreeSet<String>,
    pub name_to_descriptor: BTreeMap<String, String>,
    /// Every distinct (normalized term, SCR UI) pair, in snapshot order.
    pub all_scr_terms: Vec<(String, String)>,
    pub scr_hosts: BTreeMap<String, Vec<String>>,
}

impl SnapshotIndex {
    pub fn build(snapshot: &Snapshot) -> Result<Self, SnapshotError> {
        let mut index = SnapshotIndex {
            year: snapshot.year,
            ..Default::default()
        };

        for d in &snapshot.descriptors {
            for c in &d.concepts {
                if index
                    .concept_to_descriptor
                    .insert(c.ui.clone(), d.ui.clone())
                    .is_some()
                {
                    return Err(SnapshotError::DuplicateConceptOwner(c.ui.clone()));
                }
                if !c.preferred {
                    index.subordinate_concepts.insert(c.ui.clone());
                }
            }
            let name = normalize_term(&d.name);
            match index.name_to_descriptor.get(&name) {
                Some(existing) if existing <= &d.ui => {}
                _ => {
                    index.name_to_descriptor.insert(name, d.ui.clone());
                }
            }
        }

        for s in &snapshot.scrs {
            let mut seen_terms = HashSet::new();
            for c in &s.concepts {
                if index.concept_to_scr.insert(c.ui.clone(), s.ui.clone()).is_some() {
                    return Err(SnapshotError::DuplicateConceptOwner(c.ui.clone()));
                }
                for term in &c.terms {
                    let norm = normalize_term(term);
                    if norm.is_empty() || !seen_terms.insert(norm.clone()) {
                        continue;
                    }
                    index
                        .term_to_scrs
                        .entry(norm.clone())
                        .or_default()
                        .insert(s.ui.clone());
                    index.all_scr_terms.push((norm, s.ui.clone()));
                }
            }
            index.scr_hosts.insert(s.ui.clone(), s.mapped_to.clone());
        }
        Ok(index)
    }

    pub fn lookup_scrs_by_term(&self, term: &str) -> BTreeSet<String> {
        self.term_to_scrs
            .get(&normalize_term(term))
            .cloned()
            .unwrap_or_default()
    }

    pub fn lookup_descriptor_by_name(&self, name: &str) -> Option<&str> {
        let key = normalize_term(name);
        if key.is_empty() {
            return None;
        }
        self.name_to_descriptor.get(&key).map(String::as_str)
    }

    pub fn hosts_of(&self, scr_ui: &str) -> Option<&[String]> {
        self.scr_hosts.get(scr_ui).map(Vec::as_slice)
    }
}

pub fn build_index(snapshot: &Snapshot) -> Result<SnapshotIndex, SnapshotError> {
    SnapshotIndex::build(snapshot)
}

/// A loaded snapshot paired with its index.
#[derive(Debug, Clone)]
pub struct IndexedSnapshot {
    pub snapshot: Snapshot,
    pub index: SnapshotIndex,
}

impl IndexedSnapshot {
    pub fn new(snapshot: Snapshot) -> Result<Self, SnapshotError> {
        let index = SnapshotIndex::build(&snapshot)?;
        Ok(IndexedSnapshot { snapshot, index })
    }
}

/// All loaded years, keyed by snapshot year.
pub type SnapshotSet = BTreeMap<i32, IndexedSnapshot>;
