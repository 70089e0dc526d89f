# tdec_coordination/cohort.py
"""
Cohort selection from clinical scale scores, and the subject label file.

Metadata CSV: subject_id,group,bprs,hamd
Label file:   subject_id,label
Cohort index: subject_id,label,channels,manifest (paths relative to the index)
"""

import csv
import io
import math
from dataclasses import dataclass

from .artifacts import csv_text
from .errors import FormatError

METADATA_HEADER = ["subject_id", "group", "bprs", "hamd"]
LABEL_HEADER = ["subject_id", "label"]
COHORT_HEADER = ["subject_id", "label", "channels", "manifest"]


@dataclass(frozen=True)
class SelectionRule:
    """Score window for one group: min bounds inclusive, max bounds exclusive."""
    label: str
    bprs_min: float = -math.inf
    bprs_max: float = math.inf
    hamd_min: float = -math.inf
    hamd_max: float = math.inf

    def accepts(self, bprs, hamd):
        return self.bprs_min <= bprs < self.bprs_max and self.hamd_min <= hamd < self.hamd_max


DEFAULT_RULES = (
    SelectionRule("SZ", bprs_min=45, hamd_max=14),
    SelectionRule("HC", bprs_max=32, hamd_max=7),
    SelectionRule("MDD", bprs_max=32, hamd_min=20),
)


@dataclass(frozen=True)
class SubjectMetadata:
    subject_id: str
    group: str
    bprs: float
    hamd: float


def _rows(text, header, what):
    reader = csv.reader(io.StringIO(text))
    first = next(reader, None)
    if not first or [h.strip() for h in first] != header:
        raise FormatError(f"{what} header must be {','.join(header)}", row=0)
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} values, got {len(row)}", row=row_no)
        yield row_no, [cell.strip() for cell in row]


def parse_subject_metadata(text):
    subjects = []
    seen = set()
    for row_no, (subject_id, group, bprs, hamd) in _rows(text, METADATA_HEADER, "metadata"):
        scores = []
        for col, value in ((3, bprs), (4, hamd)):
            try:
                score = float(value)
            except ValueError:
                raise FormatError(f"non-numeric score '{value}'", row=row_no, column=col) from None
            if not math.isfinite(score):
                raise FormatError(f"non-finite score '{value}'", row=row_no, column=col)
            scores.append(score)
        if subject_id in seen:
            raise FormatError(f"duplicate subject '{subject_id}'", row=row_no)
        seen.add(subject_id)
        subjects.append(SubjectMetadata(subject_id, group.upper(), *scores))
    return subjects


def select_subjects(subjects, rules=DEFAULT_RULES):
    """(subject_id, label) for subjects whose group has a rule their scores satisfy."""
    by_label = {rule.label: rule for rule in rules}
    chosen = [(s.subject_id, s.group) for s in subjects
              if s.group in by_label and by_label[s.group].accepts(s.bprs, s.hamd)]
    return sorted(chosen)


def parse_labels(text):
    labels = {}
    for row_no, (subject_id, label) in _rows(text, LABEL_HEADER, "label file"):
        if not subject_id or not label:
            raise FormatError("empty subject id or label", row=row_no)
        if subject_id in labels:
            raise FormatError(f"duplicate subject '{subject_id}'", row=row_no)
        labels[subject_id] = label
    return labels


def labels_csv(pairs):
    return csv_text(LABEL_HEADER, sorted(pairs))


@dataclass(frozen=True)
class CohortEntry:
    subject_id: str
    label: str
    channels: str
    manifest: str


def parse_cohort_index(text):
    entries = []
    for row_no, (subject_id, label, channels, manifest) in _rows(text, COHORT_HEADER, "cohort index"):
        if not subject_id or not channels or not manifest:
            raise FormatError("empty subject id or path", row=row_no)
        entries.append(CohortEntry(subject_id, label, channels, manifest))
    return entries
