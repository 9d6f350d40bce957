"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from saasim.world import parse_scenario


def make_scenario(obstacles=None, **overrides):
    """Small open-world scenario with inline overrides for unit tests."""
    document = {
        "bounds": [[-50.0, -50.0], [50.0, 50.0]],
        "obstacles": obstacles if obstacles is not None else [],
        "start": [0.0, 0.0, 0.0],
        "goal": [40.0, 0.0],
    }
    document.update(overrides)
    return parse_scenario(document)


def tileable_texture(shape, seed, levels=255):
    """Smooth random texture that tiles under np.roll.

    Built from iid noise blurred with a circular binomial kernel, so a
    wrapped shift of the result has no seam and synthetic-shift tracking
    tests have exact ground truth everywhere.
    """
    rng = np.random.default_rng(seed)
    base = rng.random(shape) * levels
    weights = np.array([1.0, 4.0, 6.0, 4.0, 1.0])
    for _ in range(2):
        for axis in (0, 1):
            acc = np.zeros_like(base)
            for offset, w in zip(range(-2, 3), weights):
                acc += w * np.roll(base, offset, axis=axis)
            base = acc / 16.0
    lo, hi = base.min(), base.max()
    base = (base - lo) / (hi - lo) * levels
    return np.clip(np.round(base), 0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def pole_scenario():
    from saasim.world import load_scenario
    from pathlib import Path
    return load_scenario(Path(__file__).resolve().parent.parent / "scenarios" / "pole.json")
