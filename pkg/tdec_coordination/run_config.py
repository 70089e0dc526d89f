# tdec_coordination/run_config.py
"""
Run configuration: built-in defaults, modality presets, an optional JSON
config file and explicit command-line values, merged in that order.
"""

import json
from pathlib import Path

from .artifacts import json_text, atomic_write_text
from .classify import SvmParams
from .errors import FormatError
from .ingest import Modality
from .jacobi import SOLVERS
from .spectrum import parse_index_ranges
from .tdec import EmbeddingConfig

CONFIG_FILENAME = "tdec_config.json"
SAVED_FILENAME = "run_config.json"

DEFAULT_CONFIG = {
    "rate": 100.0,
    "delay_scale": 1,
    "num_delays": 15,
    "ranges": "0:0.03,0.95:1",
    "channels": 6,
    "min_segment_s": 5.0,
    "modality": "OTHER",
    "c": 1.0,
    "gamma": "auto",
    "kkt_tol": 1e-3,
    "max_passes": 200,
    "seed": 0,
    "reference": "HC",
    "positive_label": "SZ",
    "negative_label": "HC",
    "standardize": "fold",
    "eigensolver": "jacobi",
    "workers": 1,
    "out_dir": ".",
}

# Vocal tract variables at 100 Hz with a 70 ms lag step; facial action
# units at 28 fps with a 107 ms lag step.
PRESETS = {
    "tv": {"rate": 100.0, "delay_scale": 7, "num_delays": 15, "ranges": "0:0.03,0.95:1",
           "modality": "TV", "channels": 6},
    "fau": {"rate": 28.0, "delay_scale": 3, "num_delays": 15, "ranges": "0:0.02,0.96:1",
            "modality": "FAU", "channels": 17},
}


class RunConfig:
    def __init__(self, preset=None, config_path=None, overrides=None, search_dir=None):
        self.preset = preset
        self.config_path = self._find_config(config_path, search_dir)
        self.config = self._load()
        self.update(**{k: v for k, v in (overrides or {}).items() if v is not None})

    @staticmethod
    def _find_config(config_path, search_dir):
        if config_path is not None:
            return Path(config_path)
        candidate = Path(search_dir or ".") / CONFIG_FILENAME
        return candidate if candidate.exists() else None

    def _load(self):
        """Defaults, then the preset, then the config file"""
        config = dict(DEFAULT_CONFIG)
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise ValueError(f"unknown preset '{self.preset}' (expected one of {sorted(PRESETS)})")
            config.update(PRESETS[self.preset])
        if self.config_path is not None:
            try:
                with open(self.config_path, "r", encoding="utf-8") as f:
                    saved = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"config file {self.config_path} is not valid JSON: {e.msg}",
                                  row=e.lineno, column=e.colno) from None
            if not isinstance(saved, dict):
                raise FormatError(f"config file {self.config_path} must hold a JSON object")
            # unknown keys are kept
            config = {**config, **saved}
        return config

    def get(self, key, default=None):
        return self.config.get(key, default)

    def set(self, key, value):
        self.config[key] = value

    def update(self, **kwargs):
        self.config.update(kwargs)

    def save(self, out_dir=None):
        """Write the resolved configuration next to the run's artifacts"""
        path = Path(out_dir or self.config["out_dir"]) / SAVED_FILENAME
        atomic_write_text(path, json_text(self.config))
        return path

    def validate(self):
        self.embedding_config()
        self.index_ranges()
        self.svm_params()
        self.modality
        if self.config["standardize"] not in ("fold", "global"):
            raise ValueError(f"standardize must be 'fold' or 'global', got '{self.config['standardize']}'")
        if self.config["eigensolver"] not in SOLVERS:
            raise ValueError(f"eigensolver must be one of {SOLVERS}, got '{self.config['eigensolver']}'")
        if int(self.config["workers"]) < 1:
            raise ValueError(f"workers must be at least 1, got {self.config['workers']}")
        if not float(self.config["rate"]) > 0:
            raise ValueError(f"rate must be positive, got {self.config['rate']}")
        if float(self.config["min_segment_s"]) < 0:
            raise ValueError(f"min_segment_s must be non-negative, got {self.config['min_segment_s']}")
        pos, neg = self.classes
        if pos == neg:
            raise ValueError(f"positive and negative labels are both '{pos}'")
        return self

    def embedding_config(self):
        return EmbeddingConfig(self.config["delay_scale"], self.config["num_delays"])

    def index_ranges(self):
        return parse_index_ranges(self.config["ranges"])

    def svm_params(self):
        gamma = self.config["gamma"]
        if isinstance(gamma, str) and gamma.lower() != "auto":
            try:
                gamma = float(gamma)
            except ValueError:
                raise ValueError(f"gamma must be positive or 'auto', got '{gamma}'") from None
        return SvmParams(float(self.config["c"]), gamma, float(self.config["kkt_tol"]),
                         int(self.config["max_passes"]))

    @property
    def modality(self):
        return Modality.parse(self.config["modality"])

    @property
    def classes(self):
        return (str(self.config["positive_label"]), str(self.config["negative_label"]))
