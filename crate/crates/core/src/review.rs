//! Human adjudication of candidate SCRs and cross-validation of previous
//! hosts.
//!
//! Decisions live in an append-only JSON Lines log. Replaying the log is
//! idempotent and the last decision recorded for a descriptor wins.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pmn::ParseWarning;
use crate::resolver::{AnalysisResult, Candidate, DescriptorOutcome, Resolution, ResolutionMethod};
use crate::snapshot::SnapshotSet;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("descriptor {0} is not in the review queue")]
    UnknownDescriptor(String),
    #[error("{scr_ui} was not offered as a candidate for {descriptor_ui}")]
    CandidateNotOffered {
        descriptor_ui: String,
        scr_ui: String,
    },
    #[error("cannot write decision log: {0}")]
    LogUnwritable(#[source] io::Error),
    #[error("cannot read decision log: {0}")]
    LogUnreadable(#[source] io::Error),
    #[error("malformed decision log line {line}: {message}")]
    MalformedLogLine { line: usize, message: String },
    #[error("missing snapshot for year {0}")]
    MissingSnapshot(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReviewStatus {
    Pending,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub descriptor_ui: String,
    pub descriptor_name: String,
    pub pmn_text: String,
    pub x_text: String,
    pub candidates: Vec<Candidate>,
    pub status: ReviewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
}

impl ReviewItem {
    fn from_outcome(outcome: &DescriptorOutcome) -> Self {
        ReviewItem {
            descriptor_ui: outcome.descriptor_ui.clone(),
            descriptor_name: outcome.descriptor_name.clone(),
            pmn_text: outcome.pmn_text.clone().unwrap_or_default(),
            x_text: outcome.x_text().unwrap_or_default().to_string(),
            candidates: outcome.candidates.clone(),
            status: ReviewStatus::Pending,
            decision: None,
        }
    }

    pub fn offers(&self, scr_ui: &str) -> bool {
        self.candidates.iter().any(|c| c.scr_ui == scr_ui)
    }
}

/// One line of the decision log. An absent SCR means "no valid candidate".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub descriptor_ui: String,
    pub chosen_scr_ui: Option<String>,
    pub reviewer: String,
    pub timestamp: DateTime<Utc>,
}

/// A decision as recorded on the outcome it was applied to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedDecision {
    pub chosen_scr_ui: Option<String>,
    pub reviewer: String,
    pub timestamp: DateTime<Utc>,
}

fn awaits_review(outcome: &DescriptorOutcome) -> bool {
    !outcome.candidates.is_empty()
        && matches!(
            outcome.resolution.method,
            ResolutionMethod::Unresolved | ResolutionMethod::ManualSelection
        )
}

/// Pending items for every undecided outcome that has candidates, ordered by
/// descriptor UI.
pub fn build_review_queue(analysis: &AnalysisResult) -> Vec<ReviewItem> {
    let mut items: Vec<ReviewItem> = analysis
        .outcomes
        .iter()
        .filter(|o| awaits_review(o) && o.decision.is_none())
        .map(ReviewItem::from_outcome)
        .collect();
    items.sort_by(|a, b| a.descriptor_ui.cmp(&b.descriptor_ui));
    items
}

pub fn validate_decision(queue: &[ReviewItem], decision: &Decision) -> Result<(), ReviewError> {
    let item = queue
        .iter()
        .find(|i| i.descriptor_ui == decision.descriptor_ui)
        .ok_or_else(|| ReviewError::UnknownDescriptor(decision.descriptor_ui.clone()))?;
    if let Some(scr) = &decision.chosen_scr_ui {
        if !item.offers(scr) {
            return Err(ReviewError::CandidateNotOffered {
                descriptor_ui: decision.descriptor_ui.clone(),
                scr_ui: scr.clone(),
            });
        }
    }
    Ok(())
}

/// Validates `decision` against `queue` and appends it as one log line.
pub fn record_decision(
    log_path: &Path,
    queue: &[ReviewItem],
    decision: &Decision,
) -> Result<(), ReviewError> {
    validate_decision(queue, decision)?;
    append_decision(log_path, decision)
}

pub fn append_decision(log_path: &Path, decision: &Decision) -> Result<(), ReviewError> {
    let mut line = serde_json::to_string(decision).expect("decision serialization");
    line.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(log_path)
        .map_err(ReviewError::LogUnwritable)?;
    file.write_all(line.as_bytes())
        .and_then(|_| file.sync_data())
        .map_err(ReviewError::LogUnwritable)
}

/// Reads every decision in log order. A missing log reads as empty.
pub fn read_decisions(log_path: &Path) -> Result<Vec<Decision>, ReviewError> {
    let text = match fs::read_to_string(log_path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ReviewError::LogUnreadable(e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| ReviewError::MalformedLogLine {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Last decision per descriptor.
pub fn latest_decisions(decisions: &[Decision]) -> BTreeMap<&str, &Decision> {
    decisions
        .iter()
        .map(|d| (d.descriptor_ui.as_str(), d))
        .collect()
}

/// Applies decisions to the outcomes that went to review. Decisions for
/// descriptors without candidates are ignored.
pub fn apply_decision_list(analysis: &AnalysisResult, decisions: &[Decision]) -> AnalysisResult {
    let latest = latest_decisions(decisions);
    let mut out = analysis.clone();
    for outcome in &mut out.outcomes {
        let Some(decision) = latest.get(outcome.descriptor_ui.as_str()) else {
            continue;
        };
        if !awaits_review(outcome) {
            continue;
        }
        outcome.resolution = match &decision.chosen_scr_ui {
            Some(scr) => Resolution {
                descriptor_ui: outcome.descriptor_ui.clone(),
                scr_ui: Some(scr.clone()),
                method: ResolutionMethod::ManualSelection,
                also_matched_by_name: false,
                matched_term: outcome
                    .candidates
                    .iter()
                    .find(|c| &c.scr_ui == scr)
                    .map(|c| c.matched_term.clone()),
            },
            None => Resolution::unresolved(&outcome.descriptor_ui),
        };
        outcome.previous_hosts.clear();
        outcome.decision = Some(AppliedDecision {
            chosen_scr_ui: decision.chosen_scr_ui.clone(),
            reviewer: decision.reviewer.clone(),
            timestamp: decision.timestamp,
        });
    }
    out
}

pub fn apply_decisions(
    analysis: &AnalysisResult,
    log_path: &Path,
) -> Result<AnalysisResult, ReviewError> {
    Ok(apply_decision_list(analysis, &read_decisions(log_path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgreementClass {
    Identical,
    SomeDifferent,
    PmnPlusAdditional,
    PmnSubsetOnly,
}

impl AgreementClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AgreementClass::Identical => "Identical",
            AgreementClass::SomeDifferent => "SomeDifferent",
            AgreementClass::PmnPlusAdditional => "PmnPlusAdditional",
            AgreementClass::PmnSubsetOnly => "PmnSubsetOnly",
        }
    }
}

/// Compares SCR-derived hosts (`resolved`) with note-reported hosts (`pmn`).
/// A comparison where exactly one side is empty counts as `SomeDifferent`.
pub fn classify_host_agreement(
    resolved: &BTreeSet<String>,
    pmn: &BTreeSet<String>,
) -> AgreementClass {
    if resolved == pmn {
        AgreementClass::Identical
    } else if resolved.is_empty() || pmn.is_empty() {
        AgreementClass::SomeDifferent
    } else if pmn.is_subset(resolved) {
        AgreementClass::PmnPlusAdditional
    } else if resolved.is_subset(pmn) {
        AgreementClass::PmnSubsetOnly
    } else {
        AgreementClass::SomeDifferent
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostAgreement {
    pub descriptor_ui: String,
    pub scr_ui: String,
    pub resolved_hosts: BTreeSet<String>,
    pub pmn_host_names: Vec<String>,
    pub pmn_hosts_mapped: BTreeSet<String>,
    pub unmapped_names: Vec<String>,
    pub class: AgreementClass,
    /// Note irregularities that bear on the comparison.
    pub warnings: Vec<ParseWarning>,
}

fn via_note(method: ResolutionMethod) -> bool {
    matches!(
        method,
        ResolutionMethod::PmnTermExact
            | ResolutionMethod::DescriptorNameExact
            | ResolutionMethod::ManualSelection
    )
}

/// Compares previous hosts for every link made through the note. Links made
/// by concept identifiers are not cross-validated. Never alters the analysis.
pub fn cross_validate(
    analysis: &AnalysisResult,
    snapshots: &SnapshotSet,
) -> Result<Vec<HostAgreement>, ReviewError> {
    let mut out = Vec::new();
    for outcome in &analysis.outcomes {
        let (Some(scr), true) = (&outcome.resolution.scr_ui, via_note(outcome.resolution.method))
        else {
            continue;
        };
        let year = outcome.year_introduced - 1;
        let index = &snapshots
            .get(&year)
            .ok_or(ReviewError::MissingSnapshot(year))?
            .index;

        let resolved_hosts: BTreeSet<String> =
            index.hosts_of(scr).unwrap_or_default().iter().cloned().collect();
        let pmn_host_names: Vec<String> = outcome
            .pmn_hosts
            .iter()
            .map(|h| h.name.clone())
            .filter(|n| !n.is_empty())
            .collect();
        let mut pmn_hosts_mapped = BTreeSet::new();
        let mut unmapped_names = Vec::new();
        for name in &pmn_host_names {
            match index.lookup_descriptor_by_name(name) {
                Some(ui) => {
                    pmn_hosts_mapped.insert(ui.to_string());
                }
                None => unmapped_names.push(name.clone()),
            }
        }
        let warnings = outcome
            .parse
            .as_ref()
            .map(|p| {
                p.warnings
                    .iter()
                    .copied()
                    .filter(|w| matches!(w, ParseWarning::EmptyHostName | ParseWarning::MissingHosts))
                    .collect()
            })
            .unwrap_or_default();

        out.push(HostAgreement {
            descriptor_ui: outcome.descriptor_ui.clone(),
            scr_ui: scr.clone(),
            class: classify_host_agreement(&resolved_hosts, &pmn_hosts_mapped),
            resolved_hosts,
            pmn_host_names,
            pmn_hosts_mapped,
            unmapped_names,
            warnings,
        });
    }
    Ok(out)
}

/// Review state backed by the original analysis and the decision log.
///
/// Items stay listed after they are decided so a client can show progress;
/// their status flips to `Decided` and carries the latest decision.
#[derive(Debug)]
pub struct ReviewSession {
    analysis: AnalysisResult,
    decisions: Vec<Decision>,
    log_path: std::path::PathBuf,
    items: Vec<ReviewItem>,
}

impl ReviewSession {
    pub fn open(analysis: AnalysisResult, log_path: &Path) -> Result<Self, ReviewError> {
        let decisions = read_decisions(log_path)?;
        let mut items: Vec<ReviewItem> = analysis
            .outcomes
            .iter()
            .filter(|o| awaits_review(o))
            .map(ReviewItem::from_outcome)
            .collect();
        items.sort_by(|a, b| a.descriptor_ui.cmp(&b.descriptor_ui));
        let mut session = ReviewSession {
            analysis,
            decisions: Vec::new(),
            log_path: log_path.to_path_buf(),
            items,
        };
        for decision in decisions {
            session.mark(decision);
        }
        Ok(session)
    }

    fn mark(&mut self, decision: Decision) {
        if let Some(item) = self
            .items
            .iter_mut()
            .find(|i| i.descriptor_ui == decision.descriptor_ui)
        {
            item.status = ReviewStatus::Decided;
            item.decision = Some(decision.clone());
        }
        self.decisions.push(decision);
    }

    pub fn items(&self) -> &[ReviewItem] {
        &self.items
    }

    pub fn item(&self, descriptor_ui: &str) -> Option<&ReviewItem> {
        self.items.iter().find(|i| i.descriptor_ui == descriptor_ui)
    }

    pub fn submit(&mut self, decision: Decision) -> Result<(), ReviewError> {
        record_decision(&self.log_path, &self.items, &decision)?;
        self.mark(decision);
        Ok(())
    }

    /// The analysis with every recorded decision applied.
    pub fn decided_analysis(&self) -> AnalysisResult {
        apply_decision_list(&self.analysis, &self.decisions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn agreement_classes() {
        use AgreementClass::*;
        assert_eq!(classify_host_agreement(&set(&["D1", "D2"]), &set(&["D1", "D2"])), Identical);
        assert_eq!(
            classify_host_agreement(&set(&["D1", "D2", "D3"]), &set(&["D1", "D2"])),
            PmnPlusAdditional
        );
        assert_eq!(classify_host_agreement(&set(&["D1"]), &set(&["D1", "D2"])), PmnSubsetOnly);
        assert_eq!(
            classify_host_agreement(&set(&["D1", "D3"]), &set(&["D1", "D2"])),
            SomeDifferent
        );
        assert_eq!(classify_host_agreement(&set(&[]), &set(&[])), Identical);
        assert_eq!(classify_host_agreement(&set(&["D1"]), &set(&[])), SomeDifferent);
        assert_eq!(classify_host_agreement(&set(&[]), &set(&["D1"])), SomeDifferent);
    }

    #[test]
    fn missing_log_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_decisions(&dir.path().join("none.jsonl")).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reported_with_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        fs::write(
            &path,
            "{\"descriptor_ui\":\"D000001\",\"chosen_scr_ui\":null,\"reviewer\":\"r\",\"timestamp\":\"2024-01-01T00:00:00Z\"}\n\nnot json\n",
        )
        .unwrap();
        assert!(matches!(
            read_decisions(&path),
            Err(ReviewError::MalformedLogLine { line: 3, .. })
        ));
    }
}
