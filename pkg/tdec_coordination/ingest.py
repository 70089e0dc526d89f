# tdec_coordination/ingest.py
"""
Reading channel time series and diarization manifests, and slicing out
the subject's speech segments.

Channel CSV: first row = channel names, one sample per row, no time column.
Manifest JSON: [{"speaker": str, "start_s": float, "end_s": float}, ...]
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import FormatError

DEFAULT_MIN_SEGMENT_S = 5.0


class Modality(str, Enum):
    TV = "TV"
    FAU = "FAU"
    OTHER = "OTHER"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise FormatError(f"unknown modality '{value}' (expected TV, FAU or OTHER)") from None


@dataclass(frozen=True)
class ChannelSet:
    sample_rate_hz: float
    channel_names: tuple
    samples: np.ndarray  # rows = time, columns = channels
    modality_tag: Modality = Modality.OTHER

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        names = tuple(self.channel_names)
        if len(set(names)) != len(names):
            raise ValueError(f"channel names are not unique: {list(names)}")
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != len(names):
            raise ValueError(f"samples must have {len(names)} columns, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        samples.setflags(write=False)
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "modality_tag", Modality.parse(self.modality_tag))

    @property
    def num_samples(self):
        return self.samples.shape[0]

    @property
    def num_channels(self):
        return self.samples.shape[1]


def _as_text(text):
    return text.read() if hasattr(text, "read") else text


def parse_channel_csv(text, sample_rate_hz, modality_tag=Modality.OTHER):
    reader = csv.reader(io.StringIO(_as_text(text)))
    header = next(reader, None)
    if not header:
        raise FormatError("channel file has no header row")
    names = [name.strip() for name in header]
    if any(not name for name in names):
        raise FormatError("empty channel name in header", row=0)
    if len(set(names)) != len(names):
        raise FormatError(f"duplicate channel names in header: {names}", row=0)

    rows = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(names):
            raise FormatError(f"expected {len(names)} values, got {len(row)}", row=row_no)
        values = []
        for col_no, cell in enumerate(row, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise FormatError(f"non-numeric value '{cell.strip()}'", row=row_no, column=col_no) from None
            if not math.isfinite(value):
                raise ValueError(f"non-finite value '{cell.strip()}' at row {row_no}, column {col_no}")
            values.append(value)
        rows.append(values)

    if not rows:
        raise FormatError("channel file has no samples")
    return ChannelSet(sample_rate_hz, names, np.array(rows), modality_tag)


def channel_csv_text(cs):
    """Serialize with shortest round-trip float repr so re-parsing is lossless."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cs.channel_names)
    for row in cs.samples.tolist():
        writer.writerow([repr(v) for v in row])
    return buf.getvalue()


@dataclass(frozen=True)
class ManifestEntry:
    speaker_id: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class SegmentManifest:
    entries: tuple = ()

    @classmethod
    def from_entries(cls, entries):
        """Validate (speaker, start, end) records; sorted by start time."""
        checked = []
        for entry in entries:
            if not isinstance(entry, ManifestEntry):
                speaker_id, start_s, end_s = entry
                entry = ManifestEntry(str(speaker_id), float(start_s), float(end_s))
            if not (math.isfinite(entry.start_s) and math.isfinite(entry.end_s)):
                raise ValueError(f"non-finite timestamps for speaker '{entry.speaker_id}'")
            if entry.start_s < 0:
                raise ValueError(f"negative start {entry.start_s} s for speaker '{entry.speaker_id}'")
            if entry.end_s <= entry.start_s:
                raise ValueError(
                    f"entry for '{entry.speaker_id}' ends at {entry.end_s} s, not after its start {entry.start_s} s")
            checked.append(entry)

        checked.sort(key=lambda e: (e.start_s, e.end_s, e.speaker_id))
        last_end = {}
        for entry in checked:
            prev = last_end.get(entry.speaker_id)
            if prev is not None and entry.start_s < prev:
                raise ValueError(
                    f"overlapping entries for speaker '{entry.speaker_id}' at {entry.start_s} s (previous ends {prev} s)")
            last_end[entry.speaker_id] = entry.end_s
        return cls(tuple(checked))

    def for_speaker(self, speaker_id):
        return [e for e in self.entries if e.speaker_id == speaker_id]

    @property
    def speakers(self):
        return sorted({e.speaker_id for e in self.entries})


def parse_segment_manifest(text):
    try:
        data = json.loads(_as_text(text))
    except json.JSONDecodeError as e:
        raise FormatError(f"manifest is not valid JSON: {e.msg}", row=e.lineno, column=e.colno) from None
    if not isinstance(data, list):
        raise FormatError("manifest must be a JSON array of entries")
    records = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or not {"speaker", "start_s", "end_s"} <= item.keys():
            raise FormatError(f"manifest entry {i} needs 'speaker', 'start_s' and 'end_s'")
        start_s, end_s = item["start_s"], item["end_s"]
        if isinstance(start_s, bool) or isinstance(end_s, bool) \
                or not isinstance(start_s, (int, float)) or not isinstance(end_s, (int, float)):
            raise FormatError(f"manifest entry {i} has non-numeric timestamps")
        records.append((str(item["speaker"]), float(start_s), float(end_s)))
    return SegmentManifest.from_entries(records)


def manifest_json_text(manifest):
    data = [{"speaker": e.speaker_id, "start_s": e.start_s, "end_s": e.end_s} for e in manifest.entries]
    return json.dumps(data, indent=2) + "\n"


@dataclass(frozen=True)
class Segment:
    source: ChannelSet = field(repr=False)
    start_index: int
    end_index: int
    segment_id: str = ""

    def __post_init__(self):
        if not 0 <= self.start_index < self.end_index <= self.source.num_samples:
            raise ValueError(
                f"segment [{self.start_index}, {self.end_index}) outside signal of {self.source.num_samples} samples")

    @property
    def duration_s(self):
        return (self.end_index - self.start_index) / self.source.sample_rate_hz

    @property
    def length(self):
        return self.end_index - self.start_index

    @property
    def samples(self):
        return self.source.samples[self.start_index:self.end_index]


def whole_signal(cs, segment_id="all"):
    return Segment(cs, 0, cs.num_samples, segment_id)


def extract_segments(cs, manifest, speaker_id, min_duration_s=DEFAULT_MIN_SEGMENT_S):
    """Segments of one speaker strictly longer than min_duration_s.

    Segment ids are 'seg<k>' with k the ordinal of the entry among the
    speaker's manifest entries, so ids agree across modalities sampled
    at different rates.
    """
    if min_duration_s < 0:
        raise ValueError(f"min_duration_s must be non-negative, got {min_duration_s}")
    rate = cs.sample_rate_hz
    n = cs.num_samples
    segments = []
    for k, entry in enumerate(manifest.for_speaker(speaker_id)):
        start = min(int(round(entry.start_s * rate)), n)
        end = min(int(round(entry.end_s * rate)), n)
        if end <= start:
            continue
        if (end - start) / rate > min_duration_s:
            segments.append(Segment(cs, start, end, f"seg{k:03d}"))
    return segments
