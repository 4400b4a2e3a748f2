"""Smoke test for the pmn_harvest extension module.

Build the module and put it on the path, then run from the repository root:

    cargo build --release -p pmn-harvest-py --features extension-module
    cp target/release/libpmn_harvest.so /tmp/pmn_harvest.so
    PYTHONPATH=/tmp python3 crates/python/python/smoke_test.py
"""

import json
import os
import sys
import tempfile

import pmn_harvest as ph

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", ".."))
FIXTURES = os.path.join(ROOT, "fixtures")


def check_parsing():
    note = "2007; CD124 ANTIGENS was indexed under RECEPTORS, INTERLEUKIN-4 1998-2005"
    assert ph.matches_indexed_pattern(note)
    assert not ph.matches_indexed_pattern("2010; see related FOO")
    assert ph.split_sentences("a;;b") == ["a", "b"]

    parsed = ph.parse_pmn(note)
    assert parsed["intro_year"] == 2007
    clause = parsed["clauses"][0]
    assert clause["x_text"] == "CD124 ANTIGENS"
    assert clause["hosts"][0]["name"] == "RECEPTORS, INTERLEUKIN-4"
    assert clause["hosts"][0]["period"] == {"start": 1998, "end": 2005}

    hla = ph.parse_pmn("2012; HLA-DRB5 was indexed under 1992-2011")
    assert hla["warnings"] == ["EmptyHostName"], hla


def check_matching():
    assert ph.levenshtein("kitten", "sitting") == 3
    assert ph.normalize_part("Receptors") == "receptor"
    assert ph.tokenize_parts("Ataxin-3") == {"ataxin": 1, "3": 1}
    assert ph.classify_host_agreement({"D1"}, {"D1"}) == "Identical"
    assert ph.classify_host_agreement({"D1", "D2"}, {"D1"}) == "PmnPlusAdditional"
    assert ph.classify_host_agreement(set(), {"D1"}) == "SomeDifferent"


def check_pipeline():
    snapshots = [
        ph.Snapshot.load(os.path.join(FIXTURES, "mesh_%d.json" % year))
        for year in (2012, 2013, 2014)
    ]
    assert snapshots[1].year == 2013
    assert snapshots[2].lookup_descriptor_by_name("does not exist") is None

    empty = ph.Snapshot.from_json('{"year":2013,"descriptors":[],"scrs":[]}')
    assert (empty.descriptor_count, empty.scr_count) == (0, 0)
    try:
        ph.Snapshot.from_json('{"year":1800,"descriptors":[],"scrs":[]}')
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range year accepted")

    analysis = ph.run_pipeline(snapshots, 2013, 2014)
    with open(os.path.join(FIXTURES, "golden", "analysis.json")) as f:
        assert analysis.to_json() == f.read()
    assert len(analysis) == 16
    assert analysis.conservation_violations() == []

    rows = dict(analysis.summary())
    assert rows["All new descriptors"] == 16
    assert rows["SCR not found"] == 4

    outcome = analysis.outcome("D064032")
    assert outcome["resolution"]["method"] == "DescriptorNameExact"

    queue = analysis.review_queue()
    assert [item["descriptor_ui"] for item in queue] == [
        "D000067699", "D056931", "D058265", "D065008",
    ]

    decided = analysis.apply_decisions(os.path.join(FIXTURES, "decisions.jsonl"))
    assert dict(decided.summary())["SCR found by exception"] == 2
    again = ph.Analysis.from_json(decided.to_json())
    assert again.summary() == decided.summary()

    classes = [a["class"] for a in decided.cross_validate(snapshots)]
    assert classes.count("Identical") == 5, classes

    with tempfile.TemporaryDirectory() as tmp:
        log = os.path.join(tmp, "empty.jsonl")
        assert analysis.apply_decisions(log).summary() == analysis.summary()


def main():
    check_parsing()
    check_matching()
    check_pipeline()
    print("pmn_harvest smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
