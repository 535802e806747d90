"""Shared pytest fixtures: seeded generators and synthetic curve sets."""
from pathlib import Path

import numpy as np
import pytest

from models.curves import CurveSet, SampleGrid

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def step_curves(rng, n_curves, n_points, levels, breaks, noise=0.0):
    """Piecewise-constant curves with the given levels and break indices, plus noise."""
    bounds = (0, *breaks, n_points)
    template = np.concatenate([np.full(b - a, level) for level, (a, b) in zip(levels, zip(bounds[:-1], bounds[1:]))])
    return template + noise * rng.standard_normal((n_curves, n_points))


def two_groups(n_per_group=5, n_points=12):
    """Two far apart groups of identical step curves."""
    low = np.concatenate([np.zeros(n_points // 2), np.ones(n_points - n_points // 2)])
    high = 10.0 + np.concatenate([np.ones(n_points // 2) * 3, np.zeros(n_points - n_points // 2)])
    values = np.vstack([low] * n_per_group + [high] * n_per_group)
    return CurveSet(SampleGrid.regular(n_points), values)


def mixed_curves(rng, n_curves=60, n_points=50, n_groups=4, noise=0.3):
    """Noisy curves from a few piecewise-constant templates of varying complexity."""
    templates = []
    for g in range(n_groups):
        n_breaks = g + 1
        breaks = np.sort(rng.choice(np.arange(1, n_points), size=n_breaks, replace=False))
        levels = rng.normal(0.0, 3.0, size=n_breaks + 1)
        templates.append(step_curves(rng, 1, n_points, levels, tuple(breaks))[0])
    labels = np.arange(n_curves) % n_groups
    values = np.vstack([templates[g] for g in labels]) + noise * rng.standard_normal((n_curves, n_points))
    return CurveSet(SampleGrid.regular(n_points), values)


@pytest.fixture
def separable():
    return two_groups()


@pytest.fixture
def synthetic(rng):
    return mixed_curves(rng)


def dataset_path(name: str) -> Path:
    path = DATA_DIR / f"{name}.csv"
    if not path.exists():
        pytest.skip(f"{path} not downloaded (python -m scripts.fetch_datasets {name})")
    return path
