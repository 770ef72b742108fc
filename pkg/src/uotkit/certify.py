"""Shared certificates and oracles: Hilbert-type norms, scalar maximizers,
grid searches, and duality-gap assembly.

The grid oracles are deliberately naive (scan plus refine) so they stay
independent of the closed forms they are used to check; they ship in the
library so the command line ``certify`` path can run them on user data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Certificate",
    "assemble_certificate",
    "hilbert_norm",
    "double_star_norm",
    "scalar_max_oracle",
    "grid_max_scalar",
    "hilbert_norm_grid",
    "double_star_norm_grid",
]

WEAK_DUALITY_SLACK = 1e-8  # gaps below -1e-8 indicate a broken certificate


@dataclass(frozen=True)
class Certificate:
    """Primal/dual pair with its gap and worst feasibility violation."""

    primal: float
    dual: float
    gap: float
    feasibility_violation: float
    passed: bool
    weak_duality_breach: bool = False

    def to_dict(self):
        return {
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "feasibility_violation": self.feasibility_violation,
            "passed": self.passed,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def assemble_certificate(primal, dual, feas_violation, tol):
    """Build a certificate; passes iff gap <= tol, feasibility <= tol, and
    the gap does not undercut weak duality by more than 1e-8."""
    primal = float(primal)
    dual = float(dual)
    feas = float(feas_violation)
    if not (math.isfinite(primal) and math.isfinite(dual) and math.isfinite(feas)):
        raise ValueError("certificate inputs must be finite")
    gap = primal - dual
    breach = gap < -WEAK_DUALITY_SLACK
    passed = (not breach) and gap <= tol and feas <= tol
    return Certificate(primal, dual, gap, feas, passed, breach)


def hilbert_norm(f):
    """Half the range of the vector, inf over shifts of the sup-norm."""
    f = np.asarray(f, dtype=np.float64)
    if f.size == 0:
        raise ValueError("vector must be nonempty")
    return 0.5 * float(f.max() - f.min())


def double_star_norm(f, g):
    """max_{i,j} |f_i + g_j|, the smallest sup-norm sum over opposite shifts."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.size == 0 or g.size == 0:
        raise ValueError("vectors must be nonempty")
    return float(max(f.max() + g.max(), -(f.min() + g.min())))


def scalar_max_oracle(objective, bracket, tol=1e-9, max_iters=400):
    """Golden-section maximizer of a concave scalar function on a bracket.

    Returns ``(argmax, max)``. Raises if the function increases at both
    bracket ends, which a concave function cannot do.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    delta = max(tol, 1e-12) * (hi - lo)
    if objective(lo) > objective(lo + delta) and objective(hi) > objective(hi - delta):
        raise ValueError(
            "objective increases toward both bracket ends; interval does not "
            "bracket a concave maximum"
        )

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(max_iters):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    candidates = [(objective(lo), lo), (objective(hi), hi), (fc, c), (fd, d)]
    best_val, best_x = max(candidates, key=lambda t: t[0])
    return best_x, best_val


def grid_max_scalar(objective, lo, hi, steps=(1e-2, 1e-4, 1e-6)):
    """Maximize a scalar function by coarse grid scan plus local refinement.

    Each stage scans a uniform grid at the given step and the next stage
    zooms into one coarse cell around the incumbent. Suitable for unimodal
    objectives; used as an independent check of closed-form maximizers.
    """
    lo, hi = float(lo), float(hi)
    best_x, best_val = lo, -np.inf
    for step in steps:
        xs = np.arange(lo, hi + 0.5 * step, step)
        vals = np.array([objective(x) for x in xs])
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_x = float(vals[k]), float(xs[k])
        lo = best_x - step
        hi = best_x + step
    return best_x, best_val


def _grid_min_vectorized(values_of_shift, lo, hi, steps):
    best_x, best_val = lo, np.inf
    for step in steps:
        xs = np.arange(lo, hi + 0.5 * step, step)
        vals = values_of_shift(xs)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_x = float(vals[k]), float(xs[k])
        lo = best_x - step
        hi = best_x + step
    return best_x, best_val


def hilbert_norm_grid(f, lo=-20.0, hi=20.0, steps=(1e-2, 1e-4, 1e-5)):
    """Grid oracle for min over shifts of ||f + t||_inf; returns the minimum."""
    f = np.asarray(f, dtype=np.float64)

    def values(xs):
        return np.abs(f[None, :] + xs[:, None]).max(axis=1)

    _, val = _grid_min_vectorized(values, lo, hi, steps)
    return val


def double_star_norm_grid(f, g, lo=-20.0, hi=20.0, steps=(1e-2, 1e-4, 1e-5)):
    """Grid oracle for min over t of ||f + t||_inf + ||g - t||_inf."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)

    def values(xs):
        a = np.abs(f[None, :] + xs[:, None]).max(axis=1)
        b = np.abs(g[None, :] - xs[:, None]).max(axis=1)
        return a + b

    _, val = _grid_min_vectorized(values, lo, hi, steps)
    return val
