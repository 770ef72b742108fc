"""Dual functionals for unbalanced OT, optimal translations, and the primal.

Three equivalent dual views of the same problem are evaluated here:

* ``eval_F``: the plain dual objective in the potentials (f, g).
* ``eval_G``: the overparameterized objective with an explicit scalar
  translation, G(f, g, t) = F(f + t, g - t).
* ``eval_H``: the translation-invariant objective, the supremum of G over
  the translation; closed form when both penalties are KL.

The translation that attains the supremum equalizes the masses of the
reweighted marginals, which is what makes the Frank-Wolfe linear oracle a
balanced transport problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .entropies import KL, Balanced, Berg, conj_grad, conj_hess, logdotexp, divergence
from .exceptions import InfeasibleDualError, NewtonError, UnsupportedEntropyError
from .measures import DiscreteMeasure, build_cost_matrix

__all__ = [
    "DualPair",
    "UotProblem",
    "eval_F",
    "eval_G",
    "eval_H",
    "lambda_star",
    "translate",
    "updated_marginals",
    "eval_primal",
]

DUAL_FEAS_TOL = 1e-9  # absolute tolerance on max(f + g - C) when eps = 0


@dataclass(frozen=True)
class DualPair:
    """Potential vectors attached to the two marginals."""

    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = np.ascontiguousarray(np.asarray(self.f, dtype=np.float64))
        g = np.ascontiguousarray(np.asarray(self.g, dtype=np.float64))
        if f.ndim != 1 or g.ndim != 1:
            raise ValueError("potentials must be vectors")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise ValueError("potentials must be finite")
        f.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @staticmethod
    def zeros(n, m):
        return DualPair(np.zeros(n), np.zeros(m))


@dataclass(frozen=True)
class UotProblem:
    """One unbalanced transport instance.

    ``eps = 0`` is permitted only for evaluating the unregularized duals and
    for the Frank-Wolfe solvers; the Sinkhorn iterations need ``eps > 0``.
    """

    alpha: DiscreteMeasure
    beta: DiscreteMeasure
    cost: object
    ent1: object
    ent2: object
    eps: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.eps) and self.eps >= 0):
            raise ValueError("eps must be nonnegative and finite")

    @cached_property
    def cost_matrix(self):
        return build_cost_matrix(self.alpha, self.beta, self.cost)

    def check_pair(self, d):
        if d.f.size != len(self.alpha) or d.g.size != len(self.beta):
            raise ValueError("potential lengths do not match the marginals")


def _both_kl(prob):
    return isinstance(prob.ent1, KL) and isinstance(prob.ent2, KL)


def _strictly_convex(spec):
    return isinstance(spec, (KL, Berg))


def _neg_conj_neg_sum(spec, weights, pot):
    """<w, -phi*(-pot)>, returning -inf outside the conjugate's domain."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if isinstance(spec, KL):
            vals = spec.rho * (1.0 - np.exp(-pot / spec.rho))
        elif isinstance(spec, Berg):
            vals = np.where(pot > -spec.rho, spec.rho * np.log1p(pot / spec.rho), -np.inf)
        elif isinstance(spec, Balanced):
            vals = pot
        else:
            raise UnsupportedEntropyError(f"unknown entropy {spec!r}")
        out = float(np.dot(weights, np.where(weights > 0, vals, 0.0)))
    return out


def dual_feasibility_violation(prob, d):
    """max(0, max_ij f_i + g_j - C_ij), the eps = 0 constraint violation."""
    prob.check_pair(d)
    gap = d.f[:, None] + d.g[None, :] - prob.cost_matrix
    return max(0.0, float(gap.max()))


def _eps_term(prob, d):
    # eps <alpha x beta, e^((f+g-C)/eps) - 1>, via one stabilized reduction
    C = prob.cost_matrix
    expo = (d.f[:, None] + d.g[None, :] - C) / prob.eps
    lw = logdotexp(expo, prob.alpha.weights, axis=0)
    total_log = logdotexp(lw, prob.beta.weights)
    with np.errstate(over="ignore"):
        total = np.exp(total_log)
    return prob.eps * (total - prob.alpha.mass * prob.beta.mass)


def eval_F(prob, d):
    """Plain dual objective.

    <alpha, -phi1*(-f)> + <beta, -phi2*(-g)> - eps <a x b, e^((f+g-C)/eps) - 1>.
    At eps = 0 the exponential term is dropped and f + g <= C must hold
    entrywise (absolute tolerance 1e-9), else InfeasibleDualError is raised.
    """
    prob.check_pair(d)
    total = _neg_conj_neg_sum(prob.ent1, prob.alpha.weights, d.f)
    total += _neg_conj_neg_sum(prob.ent2, prob.beta.weights, d.g)
    if prob.eps == 0:
        viol = dual_feasibility_violation(prob, d)
        if viol > DUAL_FEAS_TOL:
            raise InfeasibleDualError(
                f"dual constraint violated by {viol:.3e} at eps = 0"
            )
        return total
    return total - _eps_term(prob, d)


def eval_G(prob, d, lam):
    """Overparameterized dual objective: eval_F at (f + lam, g - lam)."""
    return eval_F(prob, DualPair(d.f + lam, d.g - lam))


def lambda_star(prob, d, tol=1e-11, max_iters=100, initial=0.0):
    """Translation maximizing eval_G(d, .).

    Closed form for KL/KL penalties; otherwise a bracketed Newton iteration
    on the scalar mass-balance equation
    <alpha, grad phi1*(-f - t)> = <beta, grad phi2*(-g + t)>, run to an
    absolute residual below ``tol``. Balanced entropies are rejected: the
    maximizer is not unique there and callers must use t = 0.
    """
    prob.check_pair(d)
    e1, e2 = prob.ent1, prob.ent2
    if not (_strictly_convex(e1) and _strictly_convex(e2)):
        raise UnsupportedEntropyError(
            "optimal translation needs strictly convex conjugates (KL or Berg)"
        )
    if isinstance(e1, KL) and isinstance(e2, KL):
        la = logdotexp(-d.f / e1.rho, prob.alpha.weights)
        lb = logdotexp(-d.g / e2.rho, prob.beta.weights)
        return (e1.rho * e2.rho / (e1.rho + e2.rho)) * (la - lb)
    return _lambda_newton(prob, d, tol, max_iters, initial)


def _lambda_newton(prob, d, tol, max_iters, initial):
    aw, bw = prob.alpha.weights, prob.beta.weights
    e1, e2 = prob.ent1, prob.ent2

    # Berg conjugates are only defined below rho; stay inside the open box.
    lo_dom = -np.inf if not isinstance(e1, Berg) else -e1.rho - float(d.f.min())
    hi_dom = np.inf if not isinstance(e2, Berg) else e2.rho + float(d.g.min())
    if not lo_dom < hi_dom:
        raise NewtonError("empty translation domain for Berg conjugates")

    def residual(lam):
        with np.errstate(over="ignore"):
            left = float(np.dot(aw, conj_grad(e1, -d.f - lam)))
            right = float(np.dot(bw, conj_grad(e2, -d.g + lam)))
        return left - right

    def slope(lam):
        with np.errstate(over="ignore"):
            return -float(np.dot(aw, conj_hess(e1, -d.f - lam))) - float(
                np.dot(bw, conj_hess(e2, -d.g + lam))
            )

    def clamp(x):
        if np.isfinite(lo_dom):
            x = max(x, lo_dom + 1e-12 * max(1.0, abs(lo_dom)))
        if np.isfinite(hi_dom):
            x = min(x, hi_dom - 1e-12 * max(1.0, abs(hi_dom)))
        return x

    lam = clamp(initial)
    r0 = residual(lam)
    if abs(r0) < tol:
        return lam
    # The residual is strictly decreasing; bracket the root by doubling.
    step = 1.0
    lo, hi = lam, lam
    if r0 > 0:
        for _ in range(200):
            hi = clamp(lam + step)
            if residual(hi) <= 0:
                break
            step *= 2
        else:
            raise NewtonError("failed to bracket the optimal translation")
    else:
        for _ in range(200):
            lo = clamp(lam - step)
            if residual(lo) >= 0:
                break
            step *= 2
        else:
            raise NewtonError("failed to bracket the optimal translation")

    x = 0.5 * (lo + hi)
    for _ in range(max_iters):
        r = residual(x)
        if abs(r) < tol:
            return x
        if r > 0:
            lo = x
        else:
            hi = x
        ds = slope(x)
        newton = x - r / ds if ds < 0 and np.isfinite(ds) else None
        x = newton if newton is not None and lo < newton < hi else 0.5 * (lo + hi)
    raise NewtonError("translation Newton did not reach the residual target")


def translate(prob, d):
    """Return the translated pair (f + t*, g - t*) at the optimal t*."""
    lam = lambda_star(prob, d)
    return DualPair(d.f + lam, d.g - lam)


def eval_H(prob, d):
    """Translation-invariant dual objective, sup over translations of eval_G.

    KL/KL uses the closed form with the geometric-mean coupling of the two
    log reductions; Balanced/Balanced equals eval_F (every translation gives
    the same value); remaining strictly convex pairs solve for the optimal
    translation first.
    """
    prob.check_pair(d)
    if isinstance(prob.ent1, Balanced) and isinstance(prob.ent2, Balanced):
        return eval_F(prob, d)
    if _both_kl(prob):
        if prob.eps == 0:
            viol = dual_feasibility_violation(prob, d)
            if viol > DUAL_FEAS_TOL:
                raise InfeasibleDualError(
                    f"dual constraint violated by {viol:.3e} at eps = 0"
                )
        return _eval_h_kl(prob, d.f, d.g)
    lam = lambda_star(prob, d)
    return eval_G(prob, d, lam)


def _eval_h_kl(prob, f, g, skip_eps_term=False):
    r1, r2 = prob.ent1.rho, prob.ent2.rho
    la = logdotexp(-f / r1, prob.alpha.weights)
    lb = logdotexp(-g / r2, prob.beta.weights)
    tau1 = r1 / (r1 + r2)
    tau2 = r2 / (r1 + r2)
    with np.errstate(over="ignore"):
        coupled = (r1 + r2) * np.exp(tau1 * la + tau2 * lb)
    out = r1 * prob.alpha.mass + r2 * prob.beta.mass - coupled
    if prob.eps > 0 and not skip_eps_term:
        out -= _eps_term(prob, DualPair(f, g))
    return float(out)


def updated_marginals(prob, d):
    """Reweighted marginals (grad phi1*(-f-t*) a, grad phi2*(-g+t*) b).

    By optimality of the translation both vectors carry the same mass
    (relative agreement 1e-9 or better in practice).
    """
    lam = lambda_star(prob, d)
    with np.errstate(over="ignore"):
        ta = prob.alpha.weights * conj_grad(prob.ent1, -d.f - lam)
        tb = prob.beta.weights * conj_grad(prob.ent2, -d.g + lam)
    return ta, tb


def _plan_arrays(plan, n, m):
    # Accepts a SparsePlan-like object (source_idx/target_idx/mass) or a
    # dense matrix; returns (i, j, mass) index triplets.
    if hasattr(plan, "source_idx"):
        return plan.source_idx, plan.target_idx, plan.mass
    dense = np.asarray(plan, dtype=np.float64)
    if dense.shape != (n, m):
        raise ValueError(f"dense plan must have shape ({n}, {m})")
    if np.any(dense < 0):
        raise ValueError("plan mass must be nonnegative")
    ii, jj = np.nonzero(dense)
    return ii, jj, dense[ii, jj]


def eval_primal(prob, plan):
    """Primal objective of a transport plan.

    <plan, C> + eps KL(plan | alpha x beta) + D1(plan_1 | alpha)
    + D2(plan_2 | beta); +inf propagates from the divergences, and a plan
    entry sitting on a zero-weight product cell makes the KL term +inf.
    """
    n, m = len(prob.alpha), len(prob.beta)
    ii, jj, mass = _plan_arrays(plan, n, m)
    if np.any(mass < 0):
        raise ValueError("plan mass must be nonnegative")
    C = prob.cost_matrix
    cost_term = float(np.dot(mass, C[ii, jj]))

    marg1 = np.zeros(n)
    marg2 = np.zeros(m)
    np.add.at(marg1, ii, mass)
    np.add.at(marg2, jj, mass)

    total = cost_term
    total += divergence(prob.ent1, marg1, prob.alpha.weights)
    total += divergence(prob.ent2, marg2, prob.beta.weights)
    if prob.eps > 0:
        total += prob.eps * _kl_vs_product(prob, ii, jj, mass)
    return float(total)


def _kl_vs_product(prob, ii, jj, mass):
    # KL(plan | alpha x beta) = sum pi log(pi / q) - m(pi) + m(q) over the
    # support; vanished plan entries contribute their q mass via m(q).
    q = prob.alpha.weights[ii] * prob.beta.weights[jj]
    pos = mass > 0
    if np.any(pos & (q == 0)):
        return np.inf
    pi = mass[pos]
    out = float(np.dot(pi, np.log(pi / q[pos]))) - pi.sum()
    return out + prob.alpha.mass * prob.beta.mass
