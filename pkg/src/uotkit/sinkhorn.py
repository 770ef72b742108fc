"""Sinkhorn fixed-point iterations in three flavors, plus acceleration.

* ``f``: classical alternate maximization of the plain dual.
* ``g``: alternate maximization of the overparameterized dual, which adds
  an explicit scalar translation that is re-optimized after each pass.
* ``h``: alternate maximization of the translation-invariant dual; each
  half-update has a closed form for KL penalties (an intermediate softmin
  vector plus a scalar softmin correction) and absorbs the translation
  drift that slows the plain iteration when eps << rho.

The module also provides Anderson extrapolation of the full-step map,
empirical contraction-rate estimation from error traces, and the
Birkhoff-Hopf style upper bound on the softmin contraction factor.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .duality import DualPair, lambda_star
from .entropies import KL, aprox, logdotexp, softmin
from .exceptions import UnsupportedEntropyError
from .measures import cost_quadruple_diameter

__all__ = [
    "AndersonConfig",
    "SinkhornConfig",
    "SolverReport",
    "f_sinkhorn_step",
    "g_sinkhorn_step",
    "h_sinkhorn_step",
    "h_optimality_residual",
    "run",
    "anderson_weights",
    "estimate_rate",
    "birkhoff_rate_bound",
    "write_trace_csv",
]


@dataclass(frozen=True)
class AndersonConfig:
    """Extrapolation window depth and ridge regularization."""

    depth: int = 4
    reg: float = 1e-7

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.reg < 0:
            raise ValueError("regularization must be nonnegative")


@dataclass(frozen=True)
class SinkhornConfig:
    variant: str = "f"
    max_iters: int = 100_000
    tol: float = 1e-9
    anderson: AndersonConfig | None = None

    def __post_init__(self):
        if self.variant not in ("f", "g", "h"):
            raise ValueError("variant must be one of 'f', 'g', 'h'")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class SolverReport:
    """Outcome of an iterative run plus its per-iteration trace.

    ``trace`` maps column names to equal-length arrays (one entry per
    iteration); Sinkhorn runs record ``delta_f`` and ``wall_ns`` and, when a
    reference is supplied, ``err_f``/``err_g`` measured on the translated
    iterates. Frank-Wolfe runs reuse this type with gap columns instead.
    """

    final: DualPair
    iterations: int
    converged: bool
    trace: dict = field(default_factory=dict)
    certificate: object = None
    plan: object = None


def _smin_cols(C, f, eps, aw):
    # Softmin over the source index of C[:, j] - f, for every column j.
    return -eps * logdotexp((f[:, None] - C) / eps, aw, axis=0)


def _smin_rows(C, g, eps, bw):
    # Softmin over the target index of C[i, :] - g, for every row i.
    return -eps * logdotexp((g[None, :] - C) / eps, bw, axis=1)


def f_sinkhorn_step(prob, d):
    """One full plain step: exact coordinate maximization in g, then f.

    Each half-update composes the softmin of the cost slack with the aprox
    operator of the marginal's own entropy.
    """
    _require_positive_eps(prob)
    prob.check_pair(d)
    C, eps = prob.cost_matrix, prob.eps
    g_new = -aprox(prob.ent2, eps, -_smin_cols(C, d.f, eps, prob.alpha.weights))
    f_new = -aprox(prob.ent1, eps, -_smin_rows(C, g_new, eps, prob.beta.weights))
    return DualPair(f_new, g_new)


def g_sinkhorn_step(prob, d, lam):
    """One full translated step at the incoming translation ``lam``.

    Both half-updates are the exact blockwise maximizers of the
    overparameterized dual with the translation held fixed (the shift
    constants are re-added so each update really attains the coordinate
    maximum), after which the translation itself is re-optimized. Returns
    ``(pair, new_lam)``; the plain potentials are ``(f + lam, g - lam)``.
    """
    _require_positive_eps(prob)
    prob.check_pair(d)
    C, eps = prob.cost_matrix, prob.eps
    smin_a = _smin_cols(C, d.f + lam, eps, prob.alpha.weights)
    g_new = lam - aprox(prob.ent2, eps, -smin_a)
    smin_b = _smin_rows(C, g_new - lam, eps, prob.beta.weights)
    f_new = -lam - aprox(prob.ent1, eps, -smin_b)
    pair = DualPair(f_new, g_new)
    return pair, lambda_star(prob, pair, initial=lam)


def h_sinkhorn_step(prob, d):
    """One full translation-invariant step (KL penalties only).

    Updates g from f and then f from the new g. Each update forms the
    intermediate vector prescribed by the stationarity condition and adds
    the scalar correction k/(1-k) times a softmin of the intermediate,
    where k = (eps/(eps+rho_own)) * (rho_other/(rho1+rho2)); for equal rho
    the correction factor reduces to eps/(eps+2 rho).
    """
    _require_positive_eps(prob)
    prob.check_pair(d)
    if not (isinstance(prob.ent1, KL) and isinstance(prob.ent2, KL)):
        raise UnsupportedEntropyError("h-sinkhorn requires kl penalties on both marginals")
    C, eps = prob.cost_matrix, prob.eps
    r1, r2 = prob.ent1.rho, prob.ent2.rho
    a, b = prob.alpha, prob.beta

    g_hat = (r2 / (r2 + eps)) * _smin_cols(C, d.f, eps, a.weights)
    g_hat -= (eps / (eps + r2)) * (r2 / (r1 + r2)) * softmin(a, r1, d.f)
    k2 = (eps / (eps + r2)) * (r1 / (r1 + r2))
    g_new = g_hat + (k2 / (1.0 - k2)) * softmin(b, r2, g_hat)

    f_hat = (r1 / (r1 + eps)) * _smin_rows(C, g_new, eps, b.weights)
    f_hat -= (eps / (eps + r1)) * (r1 / (r1 + r2)) * softmin(b, r2, g_new)
    k1 = (eps / (eps + r1)) * (r2 / (r1 + r2))
    f_new = f_hat + (k1 / (1.0 - k1)) * softmin(a, r1, f_hat)
    return DualPair(f_new, g_new)


def h_optimality_residual(prob, d, side="f"):
    """Sup-norm stationarity residual of the invariant dual at the pair.

    ``side='f'`` measures optimality of f given g (zero right after an f
    update), ``side='g'`` the converse; both are the log-domain form of the
    first-order condition, rescaled so a unit residual means a unit
    potential displacement.
    """
    prob.check_pair(d)
    if not (isinstance(prob.ent1, KL) and isinstance(prob.ent2, KL)):
        raise UnsupportedEntropyError("residual defined for kl penalties only")
    C, eps = prob.cost_matrix, prob.eps
    lam = lambda_star(prob, d)
    if side == "f":
        r1 = prob.ent1.rho
        smin = _smin_rows(C, d.g, eps, prob.beta.weights)
        res = d.f - (r1 / (r1 + eps)) * smin + (eps / (eps + r1)) * lam
    elif side == "g":
        r2 = prob.ent2.rho
        smin = _smin_cols(C, d.f, eps, prob.alpha.weights)
        res = d.g - (r2 / (r2 + eps)) * smin - (eps / (eps + r2)) * lam
    else:
        raise ValueError("side must be 'f' or 'g'")
    return float(np.abs(res).max())


def _require_positive_eps(prob):
    if prob.eps <= 0:
        raise ValueError("sinkhorn iterations need eps > 0")


def anderson_weights(U, r):
    """Window weights c solving (U'U + rI) c proportional to 1, sum c = 1.

    ``U`` stacks the recent fixed-point residuals as columns. The weights
    may be negative; with r = 0 a singular window raises LinAlgError.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] < 1:
        raise ValueError("U must be a matrix with at least one column")
    k = U.shape[1]
    gram = U.T @ U + r * np.eye(k)
    sol = np.linalg.solve(gram, np.ones(k))
    denom = sol.sum()
    if not np.isfinite(denom) or denom == 0:
        raise np.linalg.LinAlgError("degenerate weight normalization")
    return sol / denom


class _AndersonState:
    # Window of (map value, residual) pairs for the concatenated potentials.
    # The window restarts whenever the residual grows, which keeps the
    # extrapolation from amplifying a bad direction.

    def __init__(self, config):
        self.depth = config.depth
        self.reg = config.reg
        self.maps = []
        self.resids = []

    def push(self, z, tz):
        resid = tz - z
        size = float(np.abs(resid).max())
        if self.resids and size > float(np.abs(self.resids[-1]).max()):
            self.maps.clear()
            self.resids.clear()
        self.maps.append(tz)
        self.resids.append(resid)
        if len(self.maps) > self.depth:
            self.maps.pop(0)
            self.resids.pop(0)

    def extrapolate(self):
        if len(self.maps) == 1:
            return self.maps[0]
        U = np.stack(self.resids, axis=1)
        c = anderson_weights(U, self.reg)
        return np.stack(self.maps, axis=1) @ c


def run(prob, config, init=None, reference=None):
    """Iterate the configured variant until the f-change drops below tol.

    ``init`` defaults to zero potentials. When ``reference`` (an optimal
    pair for the plain dual) is given, the trace records sup-norm errors of
    the translated iterates against it. Anderson extrapolation, when
    configured, acts on the concatenated (f, g) vector of the full-step map.
    """
    _require_positive_eps(prob)
    n, m = len(prob.alpha), len(prob.beta)
    d = init if init is not None else DualPair.zeros(n, m)
    prob.check_pair(d)

    variant = config.variant
    if variant == "h" and not (isinstance(prob.ent1, KL) and isinstance(prob.ent2, KL)):
        raise UnsupportedEntropyError("h-sinkhorn requires kl penalties on both marginals")

    lam_cell = [0.0]
    if variant == "g":
        lam_cell[0] = lambda_star(prob, d)

    def step(cur):
        if variant == "f":
            return f_sinkhorn_step(prob, cur)
        if variant == "g":
            new, lam_cell[0] = g_sinkhorn_step(prob, cur, lam_cell[0])
            return new
        return h_sinkhorn_step(prob, cur)

    def translated(cur):
        if variant == "f":
            return cur
        lam = lambda_star(prob, cur, initial=lam_cell[0])
        return DualPair(cur.f + lam, cur.g - lam)

    anderson = _AndersonState(config.anderson) if config.anderson else None

    delta_trace, wall_trace = [], []
    err_f_trace, err_g_trace = [], []
    converged = False
    for _ in range(config.max_iters):
        tic = time.perf_counter_ns()
        if anderson is None:
            new = step(d)
        else:
            z = np.concatenate([d.f, d.g])
            stepped = step(d)
            anderson.push(z, np.concatenate([stepped.f, stepped.g]))
            znew = anderson.extrapolate()
            new = DualPair(znew[:n], znew[n:])
        wall_trace.append(time.perf_counter_ns() - tic)
        delta = float(np.abs(new.f - d.f).max())
        delta_trace.append(delta)
        if reference is not None:
            moved = translated(new)
            err_f_trace.append(float(np.abs(moved.f - reference.f).max()))
            err_g_trace.append(float(np.abs(moved.g - reference.g).max()))
        d = new
        if delta < config.tol:
            converged = True
            break

    trace = {
        "delta_f": np.asarray(delta_trace),
        "wall_ns": np.asarray(wall_trace, dtype=np.int64),
    }
    if reference is not None:
        trace["err_f"] = np.asarray(err_f_trace)
        trace["err_g"] = np.asarray(err_g_trace)
    return SolverReport(final=d, iterations=len(delta_trace), converged=converged, trace=trace)


def estimate_rate(errors):
    """Empirical contraction factor exp(median of log e_{t+1} - log e_t).

    Trailing entries below 1e-13 sit at the float noise floor and are
    dropped before estimation; fewer than two usable ratios raise.
    """
    e = np.asarray(errors, dtype=np.float64)
    if e.ndim != 1 or e.size < 3:
        raise ValueError("need at least three error values")
    if np.any(e <= 0):
        raise ValueError("errors must be strictly positive")
    last = e.size
    while last > 0 and e[last - 1] < 1e-13:
        last -= 1
    e = e[:last]
    if e.size < 3:
        raise ValueError("fewer than 2 usable ratios after truncation")
    return float(np.exp(np.median(np.diff(np.log(e)))))


def birkhoff_rate_bound(prob):
    """Upper bound on the softmin contraction factor in the Hilbert seminorm.

    (e^(D/2eps) - 1) / (e^(D/2eps) + 1) = tanh(D / (4 eps)) where D is the
    largest quadruple difference of the cost matrix; always in [0, 1].
    """
    _require_positive_eps(prob)
    delta = cost_quadruple_diameter(prob.cost_matrix)
    return float(np.tanh(delta / (4.0 * prob.eps)))


def write_trace_csv(report, path_or_buf):
    """Emit the run trace as ``iter,delta_f,err_f,err_g,wall_ns`` rows.

    Reference columns are left empty when no reference was supplied.
    """
    own = isinstance(path_or_buf, (str, bytes))
    buf = open(path_or_buf, "w", encoding="utf-8", newline="") if own else path_or_buf
    try:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "delta_f", "err_f", "err_g", "wall_ns"])
        err_f = report.trace.get("err_f")
        err_g = report.trace.get("err_g")
        for t in range(report.iterations):
            writer.writerow(
                [
                    t + 1,
                    repr(float(report.trace["delta_f"][t])),
                    "" if err_f is None else repr(float(err_f[t])),
                    "" if err_g is None else repr(float(err_g[t])),
                    int(report.trace["wall_ns"][t]),
                ]
            )
    finally:
        if own:
            buf.close()
