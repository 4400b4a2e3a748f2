//! Summary table and provenance export.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::resolver::{AnalysisResult, DescriptorOutcome, ResolutionMethod};
use crate::review::HostAgreement;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    PathUnwritable {
        path: String,
        #[source]
        source: io::Error,
    },
}

pub const ROW_LABELS: [&str; 15] = [
    "All new descriptors",
    "Category 1",
    "non Category 1",
    "PMnote not covered by the pattern",
    "PMnote covered by the pattern",
    "SCR found overall",
    "SCR found by pref Concept",
    "SCR found by pref Concept covered by the pattern",
    "PMnote covered by the pattern and not found by concept",
    "SCR found by term",
    "SCR found by descriptor Name",
    "SCR found by both term and name",
    "SCR found by exception",
    "SCR not found",
    "SCR found by other means than pref Concept",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryTable {
    pub rows: Vec<(String, usize)>,
}

impl SummaryTable {
    pub fn get(&self, label: &str) -> Option<usize> {
        self.rows.iter().find(|(l, _)| l == label).map(|(_, n)| *n)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.rows.iter().map(|(_, n)| *n).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("label\tcount\n");
        for (label, count) in &self.rows {
            out.push_str(&format!("{label}\t{count}\n"));
        }
        out
    }
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        for (label, count) in &self.rows {
            writeln!(f, "{label:<width$}  {count:>6}")?;
        }
        Ok(())
    }
}

fn count(analysis: &AnalysisResult, pred: impl Fn(&DescriptorOutcome) -> bool) -> usize {
    analysis.outcomes.iter().filter(|o| pred(o)).count()
}

fn method_is(o: &DescriptorOutcome, m: ResolutionMethod) -> bool {
    o.resolution.method == m
}

pub fn summarize(analysis: &AnalysisResult) -> SummaryTable {
    use ResolutionMethod::*;
    let a = analysis;
    let values = [
        a.outcomes.len(),
        count(a, |o| o.category1),
        count(a, |o| !o.category1),
        count(a, |o| !o.category1 && !o.pattern_matched),
        count(a, |o| o.pattern_matched),
        count(a, |o| o.resolution.is_resolved()),
        count(a, |o| method_is(o, PreferredConcept)),
        count(a, |o| o.pattern_matched && method_is(o, PreferredConcept)),
        count(a, |o| o.in_pmn_remainder()),
        count(a, |o| method_is(o, PmnTermExact)),
        count(a, |o| {
            method_is(o, DescriptorNameExact)
                || (method_is(o, PmnTermExact) && o.resolution.also_matched_by_name)
        }),
        count(a, |o| method_is(o, PmnTermExact) && o.resolution.also_matched_by_name),
        count(a, |o| method_is(o, ManualSelection)),
        count(a, |o| o.pattern_matched && method_is(o, Unresolved)),
        count(a, |o| {
            matches!(
                o.resolution.method,
                PmnTermExact | DescriptorNameExact | ManualSelection
            )
        }),
    ];
    SummaryTable {
        rows: ROW_LABELS
            .iter()
            .zip(values)
            .map(|(l, n)| (l.to_string(), n))
            .collect(),
    }
}

/// Checks the set arithmetic that ties the cascade stages together and
/// returns one message per broken identity.
pub fn conservation_violations(analysis: &AnalysisResult) -> Vec<String> {
    use ResolutionMethod::*;
    let a = analysis;
    let all = a.outcomes.len();
    let cat1 = count(a, |o| o.category1);
    let non_cat1 = count(a, |o| !o.category1);
    let pattern = count(a, |o| o.pattern_matched);
    let non_pattern = count(a, |o| !o.category1 && !o.pattern_matched);
    let concept_in_pattern = count(a, |o| o.pattern_matched && method_is(o, PreferredConcept));
    let remainder = count(a, |o| o.in_pmn_remainder());
    let term = count(a, |o| o.pattern_matched && method_is(o, PmnTermExact));
    let name_only = count(a, |o| o.pattern_matched && method_is(o, DescriptorNameExact));
    let candidate_stage = count(a, |o| o.reached_candidate_stage());
    let both = count(a, |o| o.resolution.also_matched_by_name);
    let found = count(a, |o| o.resolution.is_resolved());
    let concept = count(a, |o| method_is(o, PreferredConcept));
    let manual = count(a, |o| method_is(o, ManualSelection));

    let checks = [
        (all == cat1 + non_cat1, "all = category 1 + non category 1"),
        (non_cat1 == pattern + non_pattern, "non category 1 = pattern + non pattern"),
        (pattern == concept_in_pattern + remainder, "pattern = concept in pattern + remainder"),
        (
            remainder == term + name_only + candidate_stage,
            "remainder = term + name only + candidate stage",
        ),
        (
            found == concept + term + name_only + manual,
            "found = concept + term + name only + exception",
        ),
        (term >= both, "term >= both term and name"),
        (
            a.outcomes.iter().all(|o| !o.category1 || !o.pattern_matched),
            "category 1 outcomes skip the pattern stage",
        ),
    ];
    checks
        .iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, msg)| msg.to_string())
        .collect()
}

pub fn method_name(method: ResolutionMethod) -> &'static str {
    match method {
        ResolutionMethod::PreferredConcept => "PreferredConcept",
        ResolutionMethod::PmnTermExact => "PmnTermExact",
        ResolutionMethod::DescriptorNameExact => "DescriptorNameExact",
        ResolutionMethod::ManualSelection => "ManualSelection",
        ResolutionMethod::Unresolved => "Unresolved",
    }
}

pub const EXPORT_HEADER: &str = "descriptor_ui\tscr_ui\tmethod\tprevious_hosts\tpmn_hosts\tagreement";

/// Renders the provenance TSV: one row per resolved descriptor.
pub fn provenance_tsv(analysis: &AnalysisResult, agreements: &[HostAgreement]) -> String {
    let by_descriptor: BTreeMap<&str, &HostAgreement> = agreements
        .iter()
        .map(|a| (a.descriptor_ui.as_str(), a))
        .collect();
    let mut resolved: Vec<&DescriptorOutcome> = analysis
        .outcomes
        .iter()
        .filter(|o| o.resolution.is_resolved())
        .collect();
    resolved.sort_by(|a, b| a.descriptor_ui.cmp(&b.descriptor_ui));

    let mut out = String::from(EXPORT_HEADER);
    out.push('\n');
    for o in resolved {
        let agreement = by_descriptor.get(o.descriptor_ui.as_str());
        let previous_hosts = match agreement {
            Some(a) => a.resolved_hosts.iter().cloned().collect::<Vec<_>>().join("|"),
            None => o.previous_hosts.join("|"),
        };
        let pmn_hosts = agreement
            .map(|a| a.pmn_hosts_mapped.iter().cloned().collect::<Vec<_>>().join("|"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            o.descriptor_ui,
            o.resolution.scr_ui.as_deref().unwrap_or(""),
            method_name(o.resolution.method),
            previous_hosts,
            pmn_hosts,
            agreement.map(|a| a.class.as_str()).unwrap_or(""),
        ));
    }
    out
}

pub fn export_provenance(
    analysis: &AnalysisResult,
    agreements: &[HostAgreement],
    path: &Path,
) -> Result<(), ReportError> {
    fs::write(path, provenance_tsv(analysis, agreements)).map_err(|source| {
        ReportError::PathUnwritable {
            path: path.display().to_string(),
            source,
        }
    })
}
