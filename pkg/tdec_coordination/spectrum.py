# tdec_coordination/spectrum.py
"""
Eigenspectra of channel-delay correlation matrices and the features
pooled from them.

Normalization divides every eigenvalue by the eigenvalue sum (the
trace). Index ranges are closed intervals over the normalized rank
position j/(dim-1) of the 0-based index j.
"""

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, NumericalError
from .ingest import Modality
from .jacobi import symmetric_eigenvalues

NEGATIVE_EIGENVALUE_TOL = -1e-8
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class Eigenspectrum:
    eigenvalues: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.array(self.eigenvalues, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("eigenspectrum must be a non-empty vector")
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    @property
    def dim(self):
        return self.eigenvalues.size

    def is_sorted(self):
        return bool(np.all(np.diff(self.eigenvalues) <= 0.0))


@dataclass(frozen=True)
class IndexRange:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise ValueError(f"index range [{self.lo}, {self.hi}] must satisfy 0 <= lo <= hi <= 1")

    def __str__(self):
        return f"{self.lo:g}:{self.hi:g}"


@dataclass(frozen=True)
class FeatureInstance:
    features: np.ndarray
    subject_id: str
    label: str
    modality_tag: Modality
    segment_id: str

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        if features.ndim != 1 or not np.all(np.isfinite(features)):
            raise ValueError(f"features of {self.subject_id}/{self.segment_id} must be a finite vector")
        features.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "modality_tag", Modality.parse(self.modality_tag))

    @property
    def key(self):
        return (self.subject_id, self.segment_id)


@dataclass(frozen=True)
class SpectrumRecord:
    spectrum: Eigenspectrum
    segment_id: str
    subject_id: str
    label: str
    modality_tag: Modality

    def __post_init__(self):
        object.__setattr__(self, "modality_tag", Modality.parse(self.modality_tag))


def eigenspectrum(m, solver="jacobi"):
    """Raw descending eigenvalues; tiny negatives from round-off clamp to 0."""
    values = np.sort(symmetric_eigenvalues(m.values, solver))[::-1]
    if values[-1] < NEGATIVE_EIGENVALUE_TOL:
        raise NumericalError(f"matrix is not positive semidefinite (eigenvalue {values[-1]:.3e})")
    return Eigenspectrum(np.clip(values, 0.0, None), normalized=False)


def normalize(spec):
    total = float(np.sum(spec.eigenvalues))
    if not total > 0:
        raise ValueError(f"cannot normalize a spectrum with non-positive sum {total}")
    return Eigenspectrum(np.clip(spec.eigenvalues / total, 0.0, 1.0), normalized=True)


def average_spectra(specs):
    specs = list(specs)
    if not specs:
        raise ValueError("cannot average an empty list of spectra")
    dims = {s.dim for s in specs}
    flags = {s.normalized for s in specs}
    if len(dims) > 1:
        raise ValueError(f"spectra have mixed dimensions {sorted(dims)}")
    if len(flags) > 1:
        raise ValueError("spectra mix raw and normalized forms")
    for i, s in enumerate(specs):
        if not s.is_sorted():
            raise ValueError(f"spectrum {i} is not sorted in descending order")
    return Eigenspectrum(np.mean([s.eigenvalues for s in specs], axis=0), normalized=specs[0].normalized)


def parse_index_ranges(text):
    ranges = []
    for token in str(text).split(","):
        token = token.strip()
        parts = token.split(":")
        try:
            if len(parts) != 2:
                raise ValueError
            ranges.append(IndexRange(float(parts[0]), float(parts[1])))
        except ValueError:
            raise FormatError(f"bad index range '{token}' (expected lo:hi with 0 <= lo <= hi <= 1)") from None
    return ranges


def format_index_ranges(ranges):
    return ",".join(str(r) for r in ranges)


def range_indices(dim, index_range):
    positions = np.arange(dim) / (dim - 1) if dim > 1 else np.zeros(1)
    return np.flatnonzero((positions >= index_range.lo) & (positions <= index_range.hi))


def pool_features(spec, ranges, subject_id, label, modality_tag, segment_id):
    if not spec.normalized:
        raise ValueError("pool_features expects a normalized spectrum")
    features = []
    for r in ranges:
        idx = range_indices(spec.dim, r)
        if idx.size == 0:
            raise ValueError(f"index range [{r.lo}, {r.hi}] selects no eigenvalue of a {spec.dim}-dim spectrum")
        features.append(float(np.mean(spec.eigenvalues[idx])))
    return FeatureInstance(np.array(features), subject_id, label, modality_tag, segment_id)


def _log10_floor(values):
    return np.log10(np.maximum(values, LOG_FLOOR))


def difference_curves(group_means, reference):
    """log10(group) - log10(reference) per rank index, for every non-reference group."""
    if reference not in group_means:
        raise ValueError(f"reference group '{reference}' not present (have {sorted(group_means)})")
    dims = {s.dim for s in group_means.values()}
    if len(dims) > 1:
        raise ValueError(f"group spectra have mixed dimensions {sorted(dims)}")
    ref = _log10_floor(group_means[reference].eigenvalues)
    return {group: _log10_floor(spec.eigenvalues) - ref
            for group, spec in sorted(group_means.items()) if group != reference}


def group_mean_spectra(records):
    """Normalized spectra averaged per subject first, then per label."""
    by_subject = defaultdict(list)
    subject_label = {}
    for rec in records:
        spec = rec.spectrum if rec.spectrum.normalized else normalize(rec.spectrum)
        by_subject[rec.subject_id].append(spec)
        previous = subject_label.setdefault(rec.subject_id, rec.label)
        if previous != rec.label:
            raise ValueError(f"subject '{rec.subject_id}' carries labels '{previous}' and '{rec.label}'")
    by_group = defaultdict(list)
    for subject in sorted(by_subject):
        by_group[subject_label[subject]].append(average_spectra(by_subject[subject]))
    return {group: average_spectra(specs) for group, specs in sorted(by_group.items())}


def plot_table(group_means, reference, zoom=None):
    """Header and rows for the averaged-eigenspectra / difference plot data."""
    diffs = difference_curves(group_means, reference)
    groups = [reference] + sorted(g for g in group_means if g != reference)
    dim = group_means[reference].dim
    logs = {g: _log10_floor(group_means[g].eigenvalues) for g in groups}

    header = ["index", "normalized_index"] + [f"log10_{g}" for g in groups] + [f"diff_{g}" for g in diffs]
    keep = np.ones(dim, dtype=bool)
    if zoom:
        keep[:] = False
        for r in zoom:
            keep[range_indices(dim, r)] = True
    rows = []
    for j in np.flatnonzero(keep):
        position = j / (dim - 1) if dim > 1 else 0.0
        row = [int(j) + 1, float(position)]
        row += [float(logs[g][j]) for g in groups]
        row += [float(diffs[g][j]) for g in diffs]
        rows.append(row)
    return header, rows


SPECTRUM_HEADER = ["segment_id", "subject_id", "label", "modality"]


def spectra_rows(records):
    dims = {r.spectrum.dim for r in records}
    if len(dims) > 1:
        raise ValueError(f"spectra have mixed dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0
    header = SPECTRUM_HEADER + [f"e{j}" for j in range(1, dim + 1)]
    rows = [[r.segment_id, r.subject_id, r.label, r.modality_tag.value] + [float(v) for v in r.spectrum.eigenvalues]
            for r in records]
    return header, rows


def parse_spectra_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[:4] != SPECTRUM_HEADER:
        raise FormatError(f"spectrum file header must start with {','.join(SPECTRUM_HEADER)}", row=0)
    dim = len(header) - 4
    if dim < 1:
        raise FormatError("spectrum file has no eigenvalue columns", row=0)
    records = []
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} values, got {len(row)}", row=row_no)
        try:
            values = [float(v) for v in row[4:]]
        except ValueError:
            raise FormatError("non-numeric eigenvalue", row=row_no) from None
        if not all(math.isfinite(v) for v in values):
            raise FormatError("non-finite eigenvalue", row=row_no)
        records.append(SpectrumRecord(Eigenspectrum(values), row[0], row[1], row[2], Modality.parse(row[3])))
    return records


FEATURE_HEADER = ["subject_id", "label", "modality", "segment_id"]


def feature_rows(instances):
    width = len(instances[0].features) if instances else 0
    header = FEATURE_HEADER + [f"f{k}" for k in range(width)]
    rows = [[i.subject_id, i.label, i.modality_tag.value, i.segment_id] + [float(v) for v in i.features]
            for i in instances]
    return header, rows


def parse_features_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[:4] != FEATURE_HEADER or len(header) < 5:
        raise FormatError(f"feature file header must be {','.join(FEATURE_HEADER)},f0..fk", row=0)
    instances = []
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} values, got {len(row)}", row=row_no)
        try:
            features = [float(v) for v in row[4:]]
        except ValueError:
            raise FormatError("non-numeric feature", row=row_no) from None
        try:
            instances.append(FeatureInstance(features, row[0], row[1], Modality.parse(row[2]), row[3]))
        except ValueError as e:
            raise FormatError(str(e), row=row_no) from None
    return instances
