# tdec_coordination/synth.py
"""
Synthetic multichannel signals with a controllable number of latent
factors, used in place of clinical recordings.

channels = latent AR(1) processes mixed by a random matrix, plus white
noise per channel. Everything is drawn from numpy's PCG64 generator;
per-subject streams come from SeedSequence.spawn, so a cohort is fully
determined by its master seed.
"""

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .artifacts import atomic_write_text, write_csv
from .cohort import COHORT_HEADER, labels_csv
from .ingest import ChannelSet, Modality, SegmentManifest, channel_csv_text, manifest_json_text

INTERVIEWER = "interviewer"


@dataclass(frozen=True)
class SynthSpec:
    channels: int = 6
    length_samples: int = 1000
    sample_rate_hz: float = 100.0
    latent_rank: int = 1
    noise_amplitude: float = 0.05
    smoothing_halflife_samples: float = 5.0
    seed: int = 0
    modality_tag: Modality = Modality.OTHER

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError(f"channels must be positive, got {self.channels}")
        if not 1 <= self.latent_rank <= self.channels:
            raise ValueError(f"latent rank {self.latent_rank} must lie in [1, {self.channels}]")
        if self.length_samples < 2:
            raise ValueError(f"length must be at least 2 samples, got {self.length_samples}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.noise_amplitude < 0 or self.smoothing_halflife_samples < 0:
            raise ValueError("noise amplitude and smoothing half-life must be non-negative")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def ar1_coefficient(halflife):
    return 0.5 ** (1.0 / halflife) if halflife > 0 else 0.0


def generate(spec):
    rng = np.random.default_rng(int(spec.seed))
    # orthonormal loading columns scaled to a mean per-channel signal variance of 1,
    # so every latent factor carries channels / rank of the variance
    loadings, _ = np.linalg.qr(rng.standard_normal((spec.channels, spec.latent_rank)))
    mixing = loadings * math.sqrt(spec.channels / spec.latent_rank)

    phi = ar1_coefficient(spec.smoothing_halflife_samples)
    burn_in = int(math.ceil(10 * spec.smoothing_halflife_samples))
    innovations = rng.standard_normal((spec.length_samples + burn_in, spec.latent_rank))
    latent = lfilter([math.sqrt(1.0 - phi * phi)], [1.0, -phi], innovations, axis=0)[burn_in:]

    samples = latent @ mixing.T
    noise = rng.standard_normal((spec.length_samples, spec.channels))
    samples = samples + spec.noise_amplitude * noise
    names = [f"ch{c + 1}" for c in range(spec.channels)]
    return ChannelSet(spec.sample_rate_hz, names, samples, spec.modality_tag)


@dataclass(frozen=True)
class SyntheticSubject:
    subject_id: str
    label: str
    channel_set: ChannelSet
    manifest: SegmentManifest
    spec: SynthSpec


def interview_manifest(subject_id, segments_per_subject, segment_s, gap_s):
    """Interviewer turn, subject turn, ... , closing interviewer turn."""
    entries = []
    t = 0.0
    for _ in range(segments_per_subject):
        entries.append((INTERVIEWER, t, t + gap_s))
        t += gap_s
        entries.append((subject_id, t, t + segment_s))
        t += segment_s
    entries.append((INTERVIEWER, t, t + gap_s))
    return SegmentManifest.from_entries(entries), t + gap_s


def generate_cohort(n_subjects, segments_per_subject, class_specs, seed, segment_s=15.0, gap_s=2.0,
                    jitter=0.1):
    """Subjects per class with class-fixed latent rank and per-subject jitter.

    n_subjects: {label: count}; class_specs: {label: SynthSpec template}.
    Subject ids are S01, S02, ... numbered in label order of n_subjects.
    The template's length and seed are overridden per subject.
    """
    if segments_per_subject < 1:
        raise ValueError(f"segments_per_subject must be positive, got {segments_per_subject}")
    if not segment_s > 0 or not gap_s > 0:
        raise ValueError("segment and gap durations must be positive")
    missing = sorted(set(n_subjects) - set(class_specs))
    if missing:
        raise ValueError(f"no synthesis template for classes {missing}")
    if any(count < 1 for count in n_subjects.values()):
        raise ValueError("every class needs at least one subject")

    total = sum(n_subjects.values())
    children = np.random.SeedSequence(int(seed)).spawn(total)
    subjects = []
    index = 0
    for label, count in n_subjects.items():
        template = class_specs[label]
        for _ in range(count):
            child = children[index]
            index += 1
            subject_id = f"S{index:02d}"
            rng = np.random.default_rng(child)
            noise_scale, halflife_scale = rng.uniform(1.0 - jitter, 1.0 + jitter, size=2)
            manifest, duration_s = interview_manifest(subject_id, segments_per_subject, segment_s, gap_s)
            spec = replace(
                template,
                length_samples=int(math.ceil(duration_s * template.sample_rate_hz)),
                noise_amplitude=template.noise_amplitude * float(noise_scale),
                smoothing_halflife_samples=template.smoothing_halflife_samples * float(halflife_scale),
                seed=int(child.generate_state(1, np.uint64)[0]),
            )
            subjects.append(SyntheticSubject(subject_id, label, generate(spec), manifest, spec))
    return subjects


def write_cohort(subjects, out_dir):
    """Channel CSVs, manifests, the label file and the cohort index.

    Returns the cohort index path. Paths inside the index are relative
    to out_dir so the tree can be moved as a whole.
    """
    out_dir = Path(out_dir)
    modalities = {s.channel_set.modality_tag for s in subjects}
    if len(modalities) != 1:
        raise ValueError(f"a cohort holds one modality, got {sorted(m.value for m in modalities)}")
    modality = modalities.pop().value
    rows = []
    for s in subjects:
        channels = f"{s.subject_id}/{modality}.csv"
        manifest = f"{s.subject_id}/manifest.json"
        atomic_write_text(out_dir / channels, channel_csv_text(s.channel_set))
        atomic_write_text(out_dir / manifest, manifest_json_text(s.manifest))
        rows.append([s.subject_id, s.label, channels, manifest])
    atomic_write_text(out_dir / "labels.csv", labels_csv([(s.subject_id, s.label) for s in subjects]))
    index = out_dir / f"cohort_{modality}.csv"
    write_csv(index, COHORT_HEADER, rows)
    return index
