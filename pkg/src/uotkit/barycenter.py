"""1-D barycenters through the multimarginal formulation.

A weighted barycenter of K measures is recovered from a K-marginal
transport problem whose cost at an index tuple is the weighted dispersion
around the weighted mean of the chosen support points. The balanced
multimarginal problem is solved exactly in linear time by a sweep that
generalizes the two-marginal monotone rule; unbalanced (KL-penalized)
barycenters are solved by Frank-Wolfe on the translation-invariant dual,
whose linear oracle is exactly that balanced sweep between reweighted
inputs sharing one common mass.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .certify import assemble_certificate
from .entropies import KL, divergence, logdotexp
from .exceptions import InfeasibleDualError, MassBalanceError
from .fw import FwConfig, ternary_max
from .measures import DiscreteMeasure
from .sinkhorn import SolverReport

__all__ = [
    "BarycenterProblem",
    "MultiPlan",
    "MultiDual",
    "multimarginal_cost",
    "barycentric_cost_fn",
    "solve_mot_1d",
    "mot_certificate",
    "multimarginal_lambda",
    "fw_barycenter",
    "extract_barycenter",
    "write_multiplan_csv",
    "read_multiplan_csv",
]

MASS_TOL = 1e-9
EXHAUSTIVE_LIMIT = 10**5  # full dual-feasibility sweeps gated by tensor size


@dataclass(frozen=True)
class BarycenterProblem:
    """K input measures, barycentric weights, and one KL strength.

    The marginal penalties are KL with per-marginal strength omega_k * rho;
    ``rho=None`` requests the balanced (hard-constraint) problem, which is
    only feasible for inputs of equal mass. The ground cost is squared
    Euclidean, the one case where the tuple cost has a closed form.
    """

    inputs: tuple
    omega: np.ndarray
    rho: float | None = None

    def __post_init__(self):
        inputs = tuple(self.inputs)
        if len(inputs) < 2:
            raise ValueError("need at least two input measures")
        om = np.asarray(self.omega, dtype=np.float64)
        if om.shape != (len(inputs),):
            raise ValueError("omega must hold one weight per input")
        if np.any(om <= 0) or abs(float(om.sum()) - 1.0) > 1e-12:
            raise ValueError("omega must be positive and sum to one")
        if self.rho is not None and not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError("rho must be positive (or None for balanced)")
        om = np.ascontiguousarray(om)
        om.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "omega", om)

    @property
    def k(self):
        return len(self.inputs)

    def rhos(self):
        if self.rho is None:
            raise ValueError("balanced problem has no KL strengths")
        return self.omega * self.rho


@dataclass(frozen=True)
class MultiPlan:
    """Multimarginal plan entries: one index tuple and one positive mass each."""

    indices: np.ndarray  # (entries, K) int64
    mass: np.ndarray  # (entries,) positive

    def __post_init__(self):
        idx = np.ascontiguousarray(np.asarray(self.indices, dtype=np.int64))
        ms = np.ascontiguousarray(np.asarray(self.mass, dtype=np.float64))
        if idx.ndim != 2 or ms.ndim != 1 or idx.shape[0] != ms.size or ms.size == 0:
            raise ValueError("plan needs matching index rows and masses")
        if np.any(ms <= 0):
            raise ValueError("plan masses must be positive")
        if idx.shape[0] > 1 and np.any(np.diff(idx, axis=0) < 0):
            raise ValueError("plan support must be monotone in every coordinate")
        idx.flags.writeable = False
        ms.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "mass", ms)

    def __len__(self):
        return self.mass.size

    @property
    def k(self):
        return self.indices.shape[1]

    @property
    def total_mass(self):
        return float(self.mass.sum())

    def marginal(self, k, size):
        out = np.zeros(size)
        np.add.at(out, self.indices[:, k], self.mass)
        return out


@dataclass(frozen=True)
class MultiDual:
    """One potential vector per marginal."""

    potentials: tuple

    def __post_init__(self):
        pots = []
        for f in self.potentials:
            arr = np.ascontiguousarray(np.asarray(f, dtype=np.float64))
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ValueError("potentials must be finite vectors")
            arr.flags.writeable = False
            pots.append(arr)
        object.__setattr__(self, "potentials", tuple(pots))

    def __iter__(self):
        return iter(self.potentials)

    def __len__(self):
        return len(self.potentials)


def multimarginal_cost(points, w):
    """Tuple cost and barycentric point for squared Euclidean ground cost.

    Returns ``(sum_k w_k (x_k - B)^2, B)`` with ``B = sum_k w_k x_k``.
    """
    pts = np.asarray(points, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = float(np.dot(w, pts))
    return float(np.dot(w, (pts - b) ** 2)), b


def barycentric_cost_fn(w):
    """Tuple-cost callable for the given barycentric weights."""
    w = np.asarray(w, dtype=np.float64)

    def cost(points):
        return multimarginal_cost(points, w)[0]

    return cost


def solve_mot_1d(inputs, w=None, costfn=None):
    """Balanced 1-D multimarginal transport between equal-mass measures.

    Sweeps all K sorted supports at once: at each step the coordinate with
    the least remaining atom mass among those that can still advance (ties
    to the lowest coordinate) is exhausted, the common amount is assigned
    to the current index tuple, and the advanced coordinate's dual value is
    set through the equality sum_k f_k = cost on the new tuple, starting
    from f_1[0] = cost(first tuple) and f_k[0] = 0 otherwise. Runs in
    O(sum_k N_k) tuple-cost evaluations.

    ``costfn`` maps a length-K point vector to a real cost and must be
    submodular for the output to be optimal; the default is the barycentric
    squared-Euclidean cost with weights ``w``. Returns ``(plan, duals)``.
    """
    inputs = tuple(inputs)
    if len(inputs) < 2:
        raise ValueError("need at least two measures")
    masses = np.array([a.mass for a in inputs])
    if float(masses.max() - masses.min()) > MASS_TOL * float(masses.max()):
        raise MassBalanceError(
            f"multimarginal sweep needs equal masses, got {masses.tolist()}"
        )
    if costfn is None:
        if w is None:
            raise ValueError("need barycentric weights when costfn is omitted")
        costfn = barycentric_cost_fn(w)

    k = len(inputs)
    pts = [a.points for a in inputs]
    wts = [a.weights for a in inputs]
    last = np.array([len(a) - 1 for a in inputs], dtype=np.int64)

    idx = np.zeros(k, dtype=np.int64)
    rem = np.array([wt[0] for wt in wts])
    pots = [np.zeros(len(a)) for a in inputs]
    cur_points = np.array([p[0] for p in pts])
    pots[0][0] = costfn(cur_points)
    pot_sum = pots[0][0]

    entry_idx, entry_mass = [], []
    while True:
        can = idx < last
        if not can.any():
            step = float(rem.min())
            if step > 0:
                entry_idx.append(idx.copy())
                entry_mass.append(step)
            break
        p = int(np.argmin(np.where(can, rem, np.inf)))
        step = float(rem[p])
        if step > 0:
            entry_idx.append(idx.copy())
            entry_mass.append(step)
        rem = np.maximum(rem - step, 0.0)
        idx[p] += 1
        cur_points[p] = pts[p][idx[p]]
        old = pots[p][idx[p] - 1]
        new = costfn(cur_points) - (pot_sum - old)
        pots[p][idx[p]] = new
        pot_sum += new - old
        rem[p] = wts[p][idx[p]]

    plan = MultiPlan(np.array(entry_idx, dtype=np.int64), np.array(entry_mass))
    return plan, MultiDual(tuple(pots))


def plan_cost(plan, inputs, costfn):
    pts = np.stack(
        [inputs[k].points[plan.indices[:, k]] for k in range(plan.k)], axis=1
    )
    return float(sum(m * costfn(row) for row, m in zip(pts, plan.mass)))


def dual_feasibility_exhaustive(inputs, duals, costfn):
    """max over the whole index grid of sum_k f_k - cost (positive = violation).

    Only call when the grid size is manageable; the certificate helpers
    gate it at 1e5 tuples.
    """
    shape = tuple(len(a) for a in inputs)
    total = np.zeros(())
    for k, f in enumerate(duals):
        reshaped = np.asarray(f).reshape((1,) * k + (shape[k],) + (1,) * (len(shape) - k - 1))
        total = total + reshaped
    worst = -np.inf
    for flat, fsum in np.ndenumerate(total):
        pts = np.array([inputs[k].points[flat[k]] for k in range(len(shape))])
        worst = max(worst, float(fsum) - costfn(pts))
    return max(0.0, worst)


def mot_certificate(inputs, w, plan, duals, costfn=None, rel_tol=1e-9):
    """Optimality certificate for a balanced multimarginal solution.

    Verifies the primal-dual equality on every support tuple, compares the
    plan cost with the dual value, checks the marginal sums against the
    inputs, and (when the full grid holds at most 1e5 tuples) sweeps the
    dual constraint exhaustively. All comparisons use ``rel_tol`` scaled by
    the magnitude of the quantity checked.
    """
    inputs = tuple(inputs)
    if costfn is None:
        costfn = barycentric_cost_fn(w)
    primal = plan_cost(plan, inputs, costfn)
    dual = float(
        sum(np.dot(inputs[k].weights, duals.potentials[k]) for k in range(plan.k))
    )

    support_viol = 0.0
    for row, _ in zip(plan.indices, plan.mass):
        pts = np.array([inputs[k].points[row[k]] for k in range(plan.k)])
        fsum = float(sum(duals.potentials[k][row[k]] for k in range(plan.k)))
        support_viol = max(support_viol, abs(fsum - costfn(pts)))

    marg_viol = 0.0
    for k, a in enumerate(inputs):
        marg = plan.marginal(k, len(a))
        marg_viol = max(marg_viol, float(np.abs(marg - a.weights).max()))

    feas_viol = 0.0
    if int(np.prod([len(a) for a in inputs])) <= EXHAUSTIVE_LIMIT:
        feas_viol = dual_feasibility_exhaustive(inputs, duals, costfn)

    scale = 1.0 + abs(primal)
    violation = max(support_viol, marg_viol, feas_viol)
    return assemble_certificate(primal, dual, violation, rel_tol * scale)


def multimarginal_lambda(duals, inputs, w, rho):
    """Optimal zero-sum translation of the multimarginal dual potentials.

    With per-marginal strengths rho_k = w_k rho and log reductions
    q_k = log <a_k, e^(-f_k / rho_k)>, the k-th component is
    rho_k q_k - (rho_k / sum rho) sum_j rho_j q_j. The components sum to
    zero and the translated reweighted inputs all share one mass.
    """
    w = np.asarray(w, dtype=np.float64)
    rhos = w * float(rho)
    q = np.array(
        [
            logdotexp(-f / rk, a.weights)
            for f, a, rk in zip(duals.potentials, inputs, rhos)
        ]
    )
    if not np.all(np.isfinite(q)):
        raise ValueError("zero-mass input or diverging reduction")
    rho_tot = float(rhos.sum())
    return rhos * q - (rhos / rho_tot) * float(np.dot(rhos, q))


def _h_value(inputs, rhos, potentials):
    # Invariant dual value: sum_k rho_k m_k - rho_tot exp(sum rho_k q_k / rho_tot).
    q = np.array(
        [logdotexp(-f / rk, a.weights) for f, a, rk in zip(potentials, inputs, rhos)]
    )
    rho_tot = float(rhos.sum())
    masses = np.array([a.mass for a in inputs])
    return float(np.dot(rhos, masses) - rho_tot * np.exp(float(np.dot(rhos, q)) / rho_tot))


def fw_barycenter(problem, config=FwConfig(), init=None):
    """Frank-Wolfe on the invariant dual of the KL multimarginal problem.

    Every iteration translates the potentials optimally, reweights each
    input to a common mass, calls the balanced multimarginal sweep as the
    linear oracle, and blends toward its dual atoms. Terminates when the
    gap between the oracle plan's penalized primal value and the invariant
    dual value drops below ``gap_tol``. Returns ``(report, plan)`` with the
    report's final potentials translated and the last oracle plan attached
    (also used to extract the barycenter).
    """
    if problem.rho is None:
        raise ValueError("balanced barycenters route directly through solve_mot_1d")
    inputs, w = problem.inputs, problem.omega
    rhos = problem.rhos()
    costfn = barycentric_cost_fn(w)

    if init is None:
        pots = [np.zeros(len(a)) for a in inputs]
    else:
        pots = [np.array(f, dtype=np.float64) for f in init.potentials]
        if any(p.size != len(a) for p, a in zip(pots, inputs)):
            raise ValueError("initial potentials do not match the inputs")
        small = int(np.prod([len(a) for a in inputs])) <= EXHAUSTIVE_LIMIT
        if small and dual_feasibility_exhaustive(inputs, MultiDual(tuple(pots)), costfn) > 1e-9:
            raise InfeasibleDualError("initial potentials violate the dual constraint")

    trace = {k: [] for k in ("h0", "fw_gap", "pd_gap", "wall_ns")}
    converged = False
    plan = None
    primal = dual = np.nan
    for t in range(config.max_iters):
        tic = time.perf_counter_ns()
        lam = multimarginal_lambda(MultiDual(tuple(pots)), inputs, w, problem.rho)
        tilted = [
            a.weights * np.exp(-(f + lk) / rk)
            for a, f, lk, rk in zip(inputs, pots, lam, rhos)
        ]
        masses = np.array([tw.sum() for tw in tilted])
        if float(masses.max() - masses.min()) > MASS_TOL * float(masses.max()):
            raise MassBalanceError("translated masses disagree; translation broken")
        plan, atoms = solve_mot_1d(
            [DiscreteMeasure(a.points, tw) for a, tw in zip(inputs, tilted)],
            w,
            costfn,
        )
        fw_gap = float(
            sum(
                np.dot(tw, r - f)
                for tw, r, f in zip(tilted, atoms.potentials, pots)
            )
        )
        dual = _h_value(inputs, rhos, pots)
        primal = plan_cost(plan, inputs, costfn) + float(
            sum(
                divergence(KL(rk), plan.marginal(k, len(a)), a.weights)
                for k, (a, rk) in enumerate(zip(inputs, rhos))
            )
        )
        pd_gap = primal - dual
        trace["h0"].append(dual)
        trace["fw_gap"].append(fw_gap)
        trace["pd_gap"].append(pd_gap)
        trace["wall_ns"].append(time.perf_counter_ns() - tic)
        if pd_gap < config.gap_tol:
            converged = True
            break
        if config.step == "harmonic":
            gamma = 2.0 / (2.0 + t)
        else:

            def value(g):
                blend = [
                    (1.0 - g) * f + g * r for f, r in zip(pots, atoms.potentials)
                ]
                return _h_value(inputs, rhos, blend)

            gamma = ternary_max(value, 0.0, 1.0, iters=60)
            gamma = max(((value(c), c) for c in (gamma, 0.0, 1.0)), key=lambda x: x[0])[1]
        pots = [
            (1.0 - gamma) * f + gamma * r for f, r in zip(pots, atoms.potentials)
        ]

    lam = multimarginal_lambda(MultiDual(tuple(pots)), inputs, w, problem.rho)
    final = MultiDual(tuple(f + lk for f, lk in zip(pots, lam)))

    feas = 0.0
    if int(np.prod([len(a) for a in inputs])) <= EXHAUSTIVE_LIMIT:
        feas = dual_feasibility_exhaustive(inputs, MultiDual(tuple(pots)), costfn)
    cert = assemble_certificate(primal, dual, feas, config.gap_tol)
    out = {k: np.asarray(v) for k, v in trace.items()}
    out["wall_ns"] = out["wall_ns"].astype(np.int64)
    report = SolverReport(
        final=final,
        iterations=len(out["h0"]),
        converged=converged,
        trace=out,
        certificate=cert,
        plan=plan,
    )
    return report, plan


def extract_barycenter(plan, inputs, w):
    """Barycenter measure of a multimarginal plan.

    One atom per plan entry at the weighted mean of the entry's support
    points, carrying the entry's mass; exactly coincident atoms merge.
    """
    w = np.asarray(w, dtype=np.float64)
    pts = np.stack(
        [inputs[k].points[plan.indices[:, k]] for k in range(plan.k)], axis=1
    )
    return DiscreteMeasure(pts @ w, plan.mass)


def write_multiplan_csv(plan, path_or_buf):
    """Write plan entries as CSV with header ``i1,...,iK,mass``."""
    own = isinstance(path_or_buf, (str, bytes))
    buf = open(path_or_buf, "w", encoding="utf-8", newline="") if own else path_or_buf
    try:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"i{k + 1}" for k in range(plan.k)] + ["mass"])
        for row, m in zip(plan.indices, plan.mass):
            writer.writerow([int(i) for i in row] + [repr(float(m))])
    finally:
        if own:
            buf.close()


def read_multiplan_csv(path_or_buf):
    own = isinstance(path_or_buf, (str, bytes))
    buf = open(path_or_buf, "r", encoding="utf-8", newline="") if own else path_or_buf
    try:
        rows = [r for r in csv.reader(ln for ln in buf if not ln.startswith("#")) if r]
    finally:
        if own:
            buf.close()
    if not rows or not rows[0] or rows[0][-1].strip() != "mass":
        raise ValueError("multimarginal plan CSV must end with a 'mass' column")
    k = len(rows[0]) - 1
    idx = [[int(c) for c in r[:k]] for r in rows[1:]]
    ms = [float(r[k]) for r in rows[1:]]
    return MultiPlan(np.array(idx, dtype=np.int64), np.array(ms))
