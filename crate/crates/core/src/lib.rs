//! Harvesting the Public MeSH Note field of new thesaurus descriptors to
//! recover the supplementary concept record each one was promoted from.
//!
//! The crate is organized along the processing stages:
//!
//! * [`snapshot`] loads and indexes yearly thesaurus snapshots,
//! * [`pmn`] parses note text into structured indexed-under clauses,
//! * [`resolver`] runs the exact-match cascade and generates candidates,
//! * [`review`] records human decisions and cross-validates previous hosts,
//! * [`report`] produces the summary table and provenance export.

pub mod pmn;
pub mod report;
pub mod resolver;
pub mod review;
pub mod snapshot;

pub use pmn::{matches_indexed_pattern, parse_pmn, split_sentences, PmnParse};
pub use report::{conservation_violations, export_provenance, summarize, SummaryTable};
pub use resolver::{levenshtein, run_pipeline, AnalysisResult, Candidate, ResolutionMethod};
pub use review::{apply_decisions, build_review_queue, classify_host_agreement, cross_validate};
pub use snapshot::{build_index, load_snapshot, Snapshot, SnapshotIndex, SnapshotSet};
