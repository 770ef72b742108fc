"""Frank-Wolfe solvers for unregularized 1-D unbalanced transport.

The solvers maximize the translation-invariant dual objective at zero
regularization over the constraint set f + g <= C. The gradient is the pair
of reweighted marginals, so the linear oracle is a balanced 1-D transport
problem between equal-mass histograms, solved exactly by the monotone
sweep. Iterates stay feasible because every step is a convex combination
of feasible dual pairs.

Three step rules are wired in: the harmonic schedule 2/(2+t), a ternary
line search on the dual objective, and the pairwise variant that moves
weight from a stored away atom onto the freshly computed oracle atom.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .certify import assemble_certificate
from .duality import (
    DualPair,
    _neg_conj_neg_sum,
    _eval_h_kl,
    dual_feasibility_violation,
    eval_primal,
    lambda_star,
    updated_marginals,
)
from .entropies import KL, Berg
from .exceptions import InfeasibleDualError, MassBalanceError, UnsupportedEntropyError
from .measures import DiscreteMeasure
from .ot1d import solve_ot_1d
from .sinkhorn import SolverReport

__all__ = [
    "FwConfig",
    "AtomStore",
    "fw_solve",
    "line_search_h0",
    "ternary_max",
    "pfw_step",
    "write_gap_csv",
]

FEAS_TOL = 1e-9
LMO_MASS_TOL = 1e-9
ATOM_DEDUP_TOL = 1e-12


@dataclass(frozen=True)
class FwConfig:
    """Step rule ('harmonic', 'linesearch', or 'pairwise'), budget, gap target."""

    step: str = "linesearch"
    max_iters: int = 5000
    gap_tol: float = 1e-6

    def __post_init__(self):
        if self.step not in ("harmonic", "linesearch", "pairwise"):
            raise ValueError("step must be 'harmonic', 'linesearch', or 'pairwise'")
        if self.gap_tol <= 0:
            raise ValueError("gap_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class AtomStore:
    """Active dual-pair atoms of the pairwise variant with their weights.

    The current iterate is the weight-averaged atom; weights form a convex
    combination (nonnegative up to -1e-14 rounding, summing to one).
    """

    r_atoms: np.ndarray
    s_atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.r_atoms, dtype=np.float64))
        s = np.atleast_2d(np.asarray(self.s_atoms, dtype=np.float64))
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if r.shape[0] != s.shape[0] or r.shape[0] != w.size or w.size == 0:
            raise ValueError("store arrays must agree on the number of atoms")
        if np.any(w < -1e-14):
            raise ValueError("weights must stay nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
        self.r_atoms, self.s_atoms, self.weights = r, s, w

    def current(self):
        return DualPair(self.weights @ self.r_atoms, self.weights @ self.s_atoms)


def _check_entropies(prob):
    for spec in (prob.ent1, prob.ent2):
        if not isinstance(spec, (KL, Berg)):
            raise UnsupportedEntropyError(
                "frank-wolfe needs strictly convex conjugates (KL or Berg)"
            )


def _h0(prob, f, g):
    # Invariant dual value at eps = 0 without the feasibility sweep; callers
    # guarantee feasibility (convex combinations of feasible pairs).
    if isinstance(prob.ent1, KL) and isinstance(prob.ent2, KL):
        return _eval_h_kl(prob, f, g, skip_eps_term=True)
    d = DualPair(f, g)
    lam = lambda_star(prob, d)
    return _neg_conj_neg_sum(prob.ent1, prob.alpha.weights, f + lam) + _neg_conj_neg_sum(
        prob.ent2, prob.beta.weights, g - lam
    )


def ternary_max(fn, lo=0.0, hi=1.0, iters=60):
    """Ternary search for the maximizer of a concave scalar function."""
    a, b = float(lo), float(hi)
    for _ in range(iters):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if fn(m1) < fn(m2):
            a = m1
        else:
            b = m2
    return 0.5 * (a + b)


def line_search_h0(prob, current, target):
    """Step size in [0, 1] approximately maximizing the blended dual value.

    Sixty ternary iterations on the concave map followed by an endpoint
    comparison, so the returned step never undercuts either endpoint by
    more than rounding.
    """

    def value(gamma):
        return _h0(
            prob,
            (1.0 - gamma) * current.f + gamma * target.f,
            (1.0 - gamma) * current.g + gamma * target.g,
        )

    gamma = ternary_max(value, 0.0, 1.0, iters=60)
    best = max(((value(c), c) for c in (gamma, 0.0, 1.0)), key=lambda t: t[0])
    return best[1]


def _default_init(prob):
    C = prob.cost_matrix
    if float(C.min()) >= 0:
        return DualPair.zeros(len(prob.alpha), len(prob.beta))
    # Half row/column minima keep f + g <= C even with negative entries.
    return DualPair(0.5 * C.min(axis=1), 0.5 * C.min(axis=0))


def _lmo(prob, d):
    ta, tb = updated_marginals(prob, d)
    mass_a, mass_b = float(ta.sum()), float(tb.sum())
    if abs(mass_a - mass_b) > LMO_MASS_TOL * max(mass_a, mass_b):
        raise MassBalanceError(
            f"reweighted marginal masses disagree ({mass_a:.12g} vs {mass_b:.12g}); "
            "optimal translation looks broken"
        )
    plan, atom = solve_ot_1d(
        DiscreteMeasure(prob.alpha.points, ta),
        DiscreteMeasure(prob.beta.points, tb),
        prob.cost,
    )
    fw_gap = float(np.dot(ta, atom.f - d.f) + np.dot(tb, atom.g - d.g))
    return ta, tb, plan, atom, fw_gap


def fw_solve(prob, config=FwConfig(), init=None, reference=None):
    """Maximize the invariant dual at eps = 0 with Frank-Wolfe iterations.

    Each iteration reweights the marginals at the optimal translation,
    solves the balanced 1-D oracle between them, records the linearized gap
    and the primal-dual gap of the oracle plan, and blends toward the
    oracle atom with the configured step rule. Terminates once the
    primal-dual gap falls below ``gap_tol``.

    The report's final pair is translated to plain potentials, its ``plan``
    is the last oracle plan (the primal certificate), and its
    ``certificate`` compares that plan's primal value with the dual value
    at ``gap_tol``. With ``reference`` given, ``err_f`` traces the sup
    distance of the translated iterate to the reference potentials.
    """
    if prob.eps != 0:
        raise ValueError("frank-wolfe solves the unregularized problem; need eps = 0")
    _check_entropies(prob)
    if config.step == "pairwise":
        return _pfw_solve(prob, config, init, reference)

    d = init if init is not None else _default_init(prob)
    prob.check_pair(d)
    if dual_feasibility_violation(prob, d) > FEAS_TOL:
        raise InfeasibleDualError("initial pair violates f + g <= C")

    trace = {k: [] for k in ("h0", "fw_gap", "pd_gap", "wall_ns")}
    err_f = []
    converged = False
    plan = None
    primal = dual = np.nan
    for t in range(config.max_iters):
        tic = time.perf_counter_ns()
        ta, tb, plan, atom, fw_gap = _lmo(prob, d)
        dual = _h0(prob, d.f, d.g)
        primal = eval_primal(prob, plan)
        pd_gap = primal - dual
        trace["h0"].append(dual)
        trace["fw_gap"].append(fw_gap)
        trace["pd_gap"].append(pd_gap)
        trace["wall_ns"].append(time.perf_counter_ns() - tic)
        if reference is not None:
            lam = lambda_star(prob, d)
            err_f.append(float(np.abs(d.f + lam - reference.f).max()))
        if pd_gap < config.gap_tol:
            converged = True
            break
        if config.step == "harmonic":
            gamma = 2.0 / (2.0 + t)
        else:
            gamma = line_search_h0(prob, d, atom)
        d = DualPair(
            (1.0 - gamma) * d.f + gamma * atom.f,
            (1.0 - gamma) * d.g + gamma * atom.g,
        )

    return _finalize(prob, config, d, plan, primal, dual, trace, err_f, converged)


def _finalize(prob, config, d, plan, primal, dual, trace, err_f, converged):
    lam = lambda_star(prob, d)
    final = DualPair(d.f + lam, d.g - lam)
    cert = assemble_certificate(
        primal, dual, dual_feasibility_violation(prob, d), config.gap_tol
    )
    out = {k: np.asarray(v) for k, v in trace.items()}
    out["wall_ns"] = out["wall_ns"].astype(np.int64)
    if err_f:
        out["err_f"] = np.asarray(err_f)
    return SolverReport(
        final=final,
        iterations=len(out["h0"]),
        converged=converged,
        trace=out,
        certificate=cert,
        plan=plan,
    )


def _active_scores(store, ta, tb):
    scores = store.r_atoms @ ta + store.s_atoms @ tb
    return np.where(store.weights > 0, scores, np.inf)


def _merge_atom(r_atoms, s_atoms, weights, r, s, weight):
    # Atoms closer than the dedup tolerance share one slot (memory control).
    dist = np.maximum(np.abs(r_atoms - r).max(axis=1), np.abs(s_atoms - s).max(axis=1))
    hit = np.nonzero(dist < ATOM_DEDUP_TOL)[0]
    if hit.size:
        weights = weights.copy()
        weights[hit[0]] += weight
        return r_atoms, s_atoms, weights
    return (
        np.vstack([r_atoms, r]),
        np.vstack([s_atoms, s]),
        np.concatenate([weights, [weight]]),
    )


def _pfw_iteration(prob, store):
    """One pairwise step; returns (new_store, diagnostics)."""
    d = store.current()
    ta, tb, plan, atom, fw_gap = _lmo(prob, d)
    dual = _h0(prob, d.f, d.g)
    diag = {
        "pair": d,
        "plan": plan,
        "fw_gap": fw_gap,
        "dual": dual,
        "primal": eval_primal(prob, plan),
    }
    scores = _active_scores(store, ta, tb)
    away = int(np.argmin(scores))  # least aligned active atom, lowest index on ties
    max_step = float(store.weights[away])
    dr = atom.f - store.r_atoms[away]
    ds = atom.g - store.s_atoms[away]
    if max_step <= 0.0 or (np.abs(dr).max() < ATOM_DEDUP_TOL and np.abs(ds).max() < ATOM_DEDUP_TOL):
        return store, diag

    def value(gamma):
        return _h0(prob, d.f + gamma * dr, d.g + gamma * ds)

    gamma = ternary_max(value, 0.0, max_step, iters=60)
    gamma = max(((value(c), c) for c in (gamma, 0.0, max_step)), key=lambda t: t[0])[1]
    if gamma <= 0.0:
        return store, diag
    w = store.weights.copy()
    w[away] = max(w[away] - gamma, 0.0)
    r_atoms, s_atoms, w = _merge_atom(
        store.r_atoms, store.s_atoms, w, atom.f, atom.g, gamma
    )
    keep = w > 0
    if not keep.all():
        r_atoms, s_atoms, w = r_atoms[keep], s_atoms[keep], w[keep]
    return AtomStore(r_atoms, s_atoms, w), diag


def pfw_step(prob, store):
    """Advance the pairwise atom store by one weight transfer.

    The least aligned active atom donates up to its whole weight to the
    freshly solved oracle atom, with the transfer sized by a line search on
    the dual objective, so the objective never decreases.
    """
    if store.weights.size == 0:
        raise ValueError("atom store is empty")
    new_store, _ = _pfw_iteration(prob, store)
    return new_store


def _pfw_solve(prob, config, init, reference):
    d0 = init if init is not None else _default_init(prob)
    prob.check_pair(d0)
    if dual_feasibility_violation(prob, d0) > FEAS_TOL:
        raise InfeasibleDualError("initial pair violates f + g <= C")
    store = AtomStore(d0.f[None, :], d0.g[None, :], np.array([1.0]))

    trace = {k: [] for k in ("h0", "fw_gap", "pd_gap", "wall_ns")}
    err_f = []
    converged = False
    plan = None
    primal = dual = np.nan
    for _ in range(config.max_iters):
        tic = time.perf_counter_ns()
        store, diag = _pfw_iteration(prob, store)
        plan, dual, primal = diag["plan"], diag["dual"], diag["primal"]
        pd_gap = primal - dual
        trace["h0"].append(dual)
        trace["fw_gap"].append(diag["fw_gap"])
        trace["pd_gap"].append(pd_gap)
        trace["wall_ns"].append(time.perf_counter_ns() - tic)
        if reference is not None:
            pair = diag["pair"]
            lam = lambda_star(prob, pair)
            err_f.append(float(np.abs(pair.f + lam - reference.f).max()))
        if pd_gap < config.gap_tol:
            converged = True
            break

    return _finalize(
        prob, config, store.current(), plan, primal, dual, trace, err_f, converged
    )


def write_gap_csv(report, path_or_buf):
    """Emit the gap trace as ``iter,h0,fw_gap,pd_gap,wall_ns`` rows."""
    import csv

    own = isinstance(path_or_buf, (str, bytes))
    buf = open(path_or_buf, "w", encoding="utf-8", newline="") if own else path_or_buf
    try:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "h0", "fw_gap", "pd_gap", "wall_ns"])
        for t in range(report.iterations):
            writer.writerow(
                [
                    t + 1,
                    repr(float(report.trace["h0"][t])),
                    repr(float(report.trace["fw_gap"][t])),
                    repr(float(report.trace["pd_gap"][t])),
                    int(report.trace["wall_ns"][t]),
                ]
            )
    finally:
        if own:
            buf.close()
