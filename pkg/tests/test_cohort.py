import pytest

from tdec_coordination.cohort import (DEFAULT_RULES, SelectionRule, labels_csv, parse_cohort_index, parse_labels,
                                      parse_subject_metadata, select_subjects)
from tdec_coordination.errors import FormatError

METADATA = """subject_id,group,bprs,hamd
P01,SZ,52,10
P02,SZ,44,3
P03,SZ,60,14
P04,HC,25,2
P05,HC,31,7
P06,MDD,28,24
P07,MDD,35,22
P08,BD,20,5
"""


def test_default_rules():
    chosen = select_subjects(parse_subject_metadata(METADATA))
    assert chosen == [("P01", "SZ"), ("P04", "HC"), ("P06", "MDD")]


def test_rule_bounds():
    sz = DEFAULT_RULES[0]
    assert sz.accepts(45, 13.9)
    assert not sz.accepts(44.9, 0)
    assert not sz.accepts(50, 14)
    rule = SelectionRule("HC", bprs_max=32)
    assert rule.accepts(0, 100)
    assert not rule.accepts(32, 0)


def test_custom_rules():
    rows = parse_subject_metadata(METADATA)
    assert select_subjects(rows, [SelectionRule("BD")]) == [("P08", "BD")]


def test_metadata_errors():
    with pytest.raises(FormatError) as err:
        parse_subject_metadata("subject_id,group,bprs,hamd\nP01,SZ,high,3\n")
    assert (err.value.row, err.value.column) == (1, 3)
    with pytest.raises(FormatError):
        parse_subject_metadata("id,group\nP01,SZ\n")
    with pytest.raises(FormatError):
        parse_subject_metadata("subject_id,group,bprs,hamd\nP01,SZ,50,3\nP01,HC,20,3\n")


def test_group_is_case_insensitive():
    rows = parse_subject_metadata("subject_id,group,bprs,hamd\nP01,hc,20,1\n")
    assert rows[0].group == "HC"


def test_label_file_round_trip():
    text = labels_csv([("S02", "HC"), ("S01", "SZ")])
    assert text == "subject_id,label\nS01,SZ\nS02,HC\n"
    assert parse_labels(text) == {"S01": "SZ", "S02": "HC"}
    with pytest.raises(FormatError):
        parse_labels("subject_id,label\nS01,SZ\nS01,HC\n")


def test_cohort_index():
    entries = parse_cohort_index("subject_id,label,channels,manifest\nS01,SZ,S01/TV.csv,S01/manifest.json\n")
    assert entries[0].channels == "S01/TV.csv"
    with pytest.raises(FormatError):
        parse_cohort_index("subject_id,label,channels,manifest\nS01,SZ,,S01/manifest.json\n")
