#![allow(dead_code)]

use std::path::PathBuf;

use pmn_harvest_core::snapshot::{load_snapshot, IndexedSnapshot, SnapshotSet};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_set() -> SnapshotSet {
    let mut set = SnapshotSet::new();
    for year in 2012..=2014 {
        let path = fixtures_dir().join(format!("mesh_{year}.json"));
        let snapshot = load_snapshot(&path).unwrap();
        set.insert(year, IndexedSnapshot::new(snapshot).unwrap());
    }
    set
}

/// Parses a `label\tcount` golden file.
pub fn golden_counts(name: &str) -> Vec<(String, usize)> {
    let text = std::fs::read_to_string(fixtures_dir().join("golden").join(name)).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let (label, count) = line.split_once('\t').unwrap();
            (label.to_string(), count.parse().unwrap())
        })
        .collect()
}
