"""Discrete measures on the real line, ground costs, and cost matrices."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import SubmodularityError

__all__ = [
    "DiscreteMeasure",
    "PowerDistance",
    "ExplicitMatrix",
    "build_cost_matrix",
    "cost_quadruple_diameter",
    "read_measure_csv",
    "write_measure_csv",
    "read_measure_json",
    "write_measure_json",
]


def _as_vector(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise ValueError(f"{name} must hold at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


class DiscreteMeasure:
    """Weighted atoms at strictly increasing positions on the real line.

    The constructor sorts the atoms and merges exact duplicate positions by
    summing their weights, so the stored support is strictly increasing
    (the 1-D sweep solvers rely on this). Weights must be nonnegative with
    positive total mass; zero-weight atoms are retained and can be removed
    with :meth:`prune_zeros`. Instances are value types: the stored arrays
    are read-only and safe to share across threads.
    """

    __slots__ = ("points", "weights")

    def __init__(self, points, weights):
        pts = _as_vector(points, "points")
        w = _as_vector(weights, "weights")
        if pts.shape != w.shape:
            raise ValueError("points and weights must have equal length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        order = np.argsort(pts, kind="stable")
        pts = pts[order]
        w = w[order]
        if pts.size > 1 and np.any(np.diff(pts) == 0.0):
            uniq, inverse = np.unique(pts, return_inverse=True)
            merged = np.zeros_like(uniq)
            np.add.at(merged, inverse, w)
            pts, w = uniq, merged
        total = float(w.sum())
        if not (np.isfinite(total) and total > 0):
            raise ValueError("total mass must be positive and finite")
        pts = np.ascontiguousarray(pts)
        w = np.ascontiguousarray(w)
        pts.flags.writeable = False
        w.flags.writeable = False
        self.points = pts
        self.weights = w

    def __len__(self):
        return self.points.size

    def __repr__(self):
        return f"DiscreteMeasure(n={len(self)}, mass={self.mass:.6g})"

    @property
    def mass(self):
        """Total mass, sum of the weights."""
        return float(self.weights.sum())

    def prune_zeros(self):
        """Return a copy without zero-weight atoms (solver preconditioning)."""
        keep = self.weights > 0
        return DiscreteMeasure(self.points[keep], self.weights[keep])


@dataclass(frozen=True)
class PowerDistance:
    """Ground cost c(x, y) = |x - y|**p with p >= 1.

    The exponent restriction keeps the cost submodular on sorted supports,
    which the monotone 1-D solvers require.
    """

    p: float = 2.0

    def __post_init__(self):
        if not (np.isfinite(self.p) and self.p >= 1):
            raise ValueError("exponent p must satisfy p >= 1")


@dataclass(frozen=True)
class ExplicitMatrix:
    """Dense user-supplied cost matrix with finite entries."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("explicit cost must be a 2-D matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("cost entries must be finite")
        m = np.ascontiguousarray(m)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


def build_cost_matrix(a, b, cost):
    """Dense cost matrix C with C[i, j] = c(x_i, y_j) on the two supports.

    For :class:`ExplicitMatrix` the stored matrix must match the support
    sizes (N, M) exactly.
    """
    if isinstance(cost, PowerDistance):
        diff = np.abs(a.points[:, None] - b.points[None, :])
        if cost.p == 1.0:
            return diff
        if cost.p == 2.0:
            return diff * diff
        return diff**cost.p
    if isinstance(cost, ExplicitMatrix):
        if cost.matrix.shape != (len(a), len(b)):
            raise ValueError(
                f"explicit cost shape {cost.matrix.shape} does not match "
                f"supports ({len(a)}, {len(b)})"
            )
        return cost.matrix
    raise TypeError(f"unknown cost specification {cost!r}")


def check_submodular(C, tol=None):
    """Raise SubmodularityError unless adjacent 2x2 minors are nonnegative.

    The Monge condition C[i,j] + C[i+1,j+1] <= C[i,j+1] + C[i+1,j] on
    adjacent pairs implies it for all index pairs, and it is what makes the
    north-west sweep produce dual-feasible potentials.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.shape[0] < 2 or C.shape[1] < 2:
        return
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.abs(C).max()))
    minors = C[:-1, 1:] + C[1:, :-1] - C[:-1, :-1] - C[1:, 1:]
    worst = float(minors.min())
    if worst < -tol:
        raise SubmodularityError(
            f"cost matrix is not submodular (worst adjacent minor {worst:.3e})"
        )


def cost_quadruple_diameter(C):
    """Largest C[j,k] + C[i,l] - C[j,l] - C[i,k] over all index quadruples.

    For a fixed column pair (k, l) the maximum over rows factorizes as
    max_j (C[j,k] - C[j,l]) - min_i (C[i,k] - C[i,l]), i.e. the range of the
    column-difference vector, so the exact value costs O(N M^2).
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost entries must be finite")
    best = 0.0
    for col in range(C.shape[1]):
        d = C - C[:, col][:, None]
        best = max(best, float((d.max(axis=0) - d.min(axis=0)).max()))
    return best


# -- measure file formats ---------------------------------------------------
#
# CSV: header "x,w", one atom per row, '.' decimal separator, UTF-8.
# Lines starting with '#' are metadata comments and are skipped.
# JSON: {"points": [...], "weights": [...]}.


def write_measure_csv(measure, path_or_buf, header_comments=()):
    """Write a measure as CSV rows ``x,w`` (optionally preceded by comments)."""
    own = isinstance(path_or_buf, (str, bytes))
    buf = open(path_or_buf, "w", encoding="utf-8", newline="") if own else path_or_buf
    try:
        for line in header_comments:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "w"])
        for x, w in zip(measure.points, measure.weights):
            writer.writerow([repr(float(x)), repr(float(w))])
    finally:
        if own:
            buf.close()


def read_measure_csv(path_or_buf):
    """Read a measure from ``x,w`` CSV; sorts and validates on construction."""
    own = isinstance(path_or_buf, (str, bytes))
    buf = open(path_or_buf, "r", encoding="utf-8", newline="") if own else path_or_buf
    try:
        rows = [r for r in csv.reader(ln for ln in buf if not ln.startswith("#")) if r]
    finally:
        if own:
            buf.close()
    if not rows or [c.strip() for c in rows[0]] != ["x", "w"]:
        raise ValueError("measure CSV must start with header 'x,w'")
    try:
        pts = [float(r[0]) for r in rows[1:]]
        wts = [float(r[1]) for r in rows[1:]]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed measure CSV row: {exc}") from exc
    return DiscreteMeasure(pts, wts)


def write_measure_json(measure, path_or_buf):
    payload = {
        "points": [float(x) for x in measure.points],
        "weights": [float(w) for w in measure.weights],
    }
    if isinstance(path_or_buf, (str, bytes)):
        with open(path_or_buf, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
    else:
        json.dump(payload, path_or_buf)


def read_measure_json(path_or_buf):
    if isinstance(path_or_buf, (str, bytes)):
        with open(path_or_buf, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    else:
        payload = json.load(path_or_buf)
    return DiscreteMeasure(payload["points"], payload["weights"])


def measure_to_csv_text(measure, header_comments=()):
    """Render the CSV format to a string (used by the command line tool)."""
    buf = io.StringIO()
    write_measure_csv(measure, buf, header_comments)
    return buf.getvalue()
