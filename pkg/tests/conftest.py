import numpy as np
import pytest

from tdec_coordination.spectrum import FeatureInstance


def build_instances(centers, segments=3, noise=0.3, seed=0, modality="TV", labels=("SZ", "HC")):
    """One subject per entry of centers (alternating labels), segment features scattered around it."""
    rng = np.random.default_rng(seed)
    instances = []
    for s, center in enumerate(centers):
        subject = f"S{s + 1:02d}"
        label = labels[s % 2]
        for k in range(segments):
            features = np.asarray(center, dtype=np.float64) + noise * rng.standard_normal(len(center))
            instances.append(FeatureInstance(features, subject, label, modality, f"seg{k:03d}"))
    return instances


@pytest.fixture
def make_instances():
    return build_instances


@pytest.fixture
def separable_instances():
    # SZ subjects near +2, HC subjects near -2
    centers = [[2.0, 2.0] if s % 2 == 0 else [-2.0, -2.0] for s in range(12)]
    return build_instances(centers)
