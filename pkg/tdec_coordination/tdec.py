# tdec_coordination/tdec.py
"""
Time-delay embedded channel-delay correlation matrices.

Each channel is augmented with num_delays copies lagged by
0, d, 2d, ... (num_delays-1)*d samples (d = delay_scale). Columns are
channel-major: column c*num_delays + k is channel c lagged by k*d.
Correlation is taken over the common valid support of all copies, which
keeps the matrix an exact normalized Gram matrix (symmetric PSD).
"""

import json
from dataclasses import dataclass

import numpy as np

from .artifacts import csv_text, json_text
from .errors import DegenerateChannelError, FormatError, InsufficientLengthError

# relative std below which an embedded column counts as constant
_ZERO_VARIANCE_RTOL = 1e-12


@dataclass(frozen=True)
class EmbeddingConfig:
    delay_scale: int = 1
    num_delays: int = 15

    def __post_init__(self):
        for name in ("delay_scale", "num_delays"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def span(self):
        """Samples consumed by the deepest lag."""
        return (self.num_delays - 1) * self.delay_scale

    @property
    def min_length(self):
        """span + 2: every lagged column needs two samples for a correlation.

        For delay_scale 7 and 15 delays that is 100 samples; 99 samples give
        single-row columns and raise InsufficientLengthError.
        """
        return self.span + 2

    def lags(self):
        return [k * self.delay_scale for k in range(self.num_delays)]


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    config: EmbeddingConfig
    channel_count: int
    channel_names: tuple = ()
    sample_rate_hz: float = 0.0

    @property
    def dim(self):
        return self.values.shape[0]


def embed(segment, config):
    """Delay-embedded ensemble: rows = valid time points, cols = channels x delays."""
    x = segment.samples
    length = x.shape[0]
    if length < config.min_length:
        raise InsufficientLengthError(config.min_length, length)
    rows = length - config.span
    columns = []
    for c in range(x.shape[1]):
        for k in range(config.num_delays):
            start = config.span - k * config.delay_scale
            columns.append(x[start:start + rows, c])
    return np.column_stack(columns)


def channel_delay_correlation(segment, config):
    ensemble = embed(segment, config)
    rows = ensemble.shape[0]
    mean = ensemble.mean(axis=0)
    centered = ensemble - mean
    std = np.sqrt(np.einsum("ij,ij->j", centered, centered) / rows)

    flat = std <= _ZERO_VARIANCE_RTOL * np.maximum(np.abs(mean), 1.0)
    if np.any(flat):
        col = int(np.flatnonzero(flat)[0])
        names = segment.source.channel_names
        raise DegenerateChannelError(names[col // config.num_delays],
                                     (col % config.num_delays) * config.delay_scale)

    z = centered / std
    gram = z.T @ z / rows
    values = np.triu(gram, 1)
    values = values + values.T
    np.fill_diagonal(values, 1.0)
    values.setflags(write=False)
    return CorrelationMatrix(values, config, segment.source.num_channels,
                             segment.source.channel_names, segment.source.sample_rate_hz)


def matrix_csv_text(m):
    return csv_text(None, m.values.tolist())


def matrix_sidecar(m, **extra):
    meta = {
        "channels": list(m.channel_names),
        "num_delays": m.config.num_delays,
        "delay_scale": m.config.delay_scale,
        "sample_rate_hz": m.sample_rate_hz,
    }
    meta.update(extra)
    return json_text(meta)


def read_matrix(csv_path, sidecar_path):
    """Load a matrix written by matrix_csv_text + matrix_sidecar; returns (matrix, sidecar dict)."""
    try:
        meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
        config = EmbeddingConfig(meta["delay_scale"], meta["num_delays"])
        channels = tuple(meta["channels"])
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(f"bad matrix sidecar {sidecar_path}: {e}") from None
    try:
        values = np.loadtxt(csv_path, delimiter=",", ndmin=2)
    except ValueError as e:
        raise FormatError(f"bad matrix file {csv_path}: {e}") from None
    dim = len(channels) * config.num_delays
    if values.shape != (dim, dim):
        raise FormatError(f"{csv_path} holds a {values.shape} matrix, sidecar implies {dim}x{dim}")
    values.setflags(write=False)
    m = CorrelationMatrix(values, config, len(channels), channels, float(meta.get("sample_rate_hz", 0.0)))
    return m, meta
