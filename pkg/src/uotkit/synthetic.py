"""Seeded synthetic measures for the command line tool, tests, and demos."""

from __future__ import annotations

import numpy as np

from .measures import DiscreteMeasure

__all__ = ["mixture_measure", "uniform_measure"]


def mixture_measure(
    n,
    seed,
    sigma=0.03,
    mu1_range=(0.1, 0.4),
    mu2_range=(0.6, 0.9),
    amp_range=(0.1, 0.8),
):
    """Empirical two-bump Gaussian mixture with uniform atom weights.

    The bump centers are drawn uniformly from the two ranges, the relative
    bump amplitudes from ``amp_range``, and the n samples split between the
    bumps proportionally to the amplitudes. Deterministic per seed.
    Returns ``(measure, params)`` where params records the drawn values.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    mu1 = float(rng.uniform(*mu1_range))
    mu2 = float(rng.uniform(*mu2_range))
    a = float(rng.uniform(*amp_range))
    b = float(rng.uniform(*amp_range))
    pick_first = rng.random(n) < a / (a + b)
    noise = rng.normal(0.0, 1.0, n)
    points = np.where(pick_first, mu1 + sigma * noise, mu2 + sigma * noise)
    weights = np.full(n, 1.0 / n)
    params = {"sigma": sigma, "mu1": mu1, "mu2": mu2, "a": a, "b": b}
    return DiscreteMeasure(points, weights), params


def uniform_measure(n, seed, lo=0.0, hi=1.0):
    """n uniform atoms on [lo, hi] with equal weights 1/n; seeded."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    points = rng.uniform(lo, hi, n)
    weights = np.full(n, 1.0 / n)
    return DiscreteMeasure(points, weights), {"lo": lo, "hi": hi}
