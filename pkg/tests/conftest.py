import numpy as np
import pytest

from momt.costs import CostSpec
from momt.instance import DiscreteInstance
from momt.measure import DiscreteMeasure, Space


def random_instance(seed, n_axes=3, max_atoms=4, kind="surplus", sense="min",
                    uniform=False, d=2):
    """Seeded instance with jittered point clouds and generic weights."""
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, max_atoms + 1, n_axes)
    spaces = [Space(f"S{k}", rng.normal(size=(n, d))) for k, n in enumerate(sizes)]
    measures = []
    for s in spaces:
        if uniform:
            w = np.ones(s.size) / s.size
        else:
            w = rng.uniform(0.3, 1.0, s.size)
            w = w / w.sum()
        measures.append(DiscreteMeasure(s, w))
    return DiscreteInstance(spaces, measures, CostSpec(kind, sense))


def tensor_instance(values, weights=None, sense="min"):
    """Instance over unit grids with an explicit cost tensor."""
    values = np.asarray(values, dtype=float)
    spaces = [Space(f"A{k}", np.arange(n, dtype=float)[:, None] * (k + 1) + k)
              for k, n in enumerate(values.shape)]
    if weights is None:
        weights = [np.ones(n) / n for n in values.shape]
    measures = [DiscreteMeasure(s, np.asarray(w, dtype=float))
                for s, w in zip(spaces, weights)]
    return DiscreteInstance(spaces, measures,
                            CostSpec("tensor", sense, {"values": values}))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
