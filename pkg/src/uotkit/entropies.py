"""Csiszar entropy family: divergences, conjugates, softmin, and aprox.

Three entropies are wired in:

* ``KL(rho)``: phi(x) = rho (x log x - x + 1), conjugate rho (e^(x/rho) - 1).
* ``Berg(rho)``: phi(x) = rho (x - 1 - log x), conjugate -rho log(1 - x/rho)
  on x < rho.
* ``Balanced``: indicator of {1}, conjugate the identity; this is the hard
  marginal constraint of classical optimal transport.

Every exp/log aggregation in the package routes through :func:`logdotexp`
so all solvers share one stabilized reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NewtonError, UnsupportedEntropyError

__all__ = [
    "KL",
    "Berg",
    "Balanced",
    "logdotexp",
    "divergence",
    "conj",
    "conj_grad",
    "conj_hess",
    "phi_prime_inf",
    "softmin",
    "aprox",
]

_BALANCED_EQ_TOL = 1e-9  # relative tolerance for the indicator divergence


@dataclass(frozen=True)
class KL:
    """Kullback-Leibler marginal penalty with strength rho > 0."""

    rho: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError("rho must be positive and finite")


@dataclass(frozen=True)
class Berg:
    """Berg (reverse-KL style) marginal penalty with strength rho > 0."""

    rho: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError("rho must be positive and finite")


@dataclass(frozen=True)
class Balanced:
    """Hard marginal constraint (indicator entropy of {1})."""


def logdotexp(values, weights, axis=None):
    """Stabilized log(sum_i w_i exp(v_i)) for nonnegative weights.

    Zero-weight entries are masked out before the max shift so that their
    values cannot poison the reduction. With ``axis`` given, ``weights``
    runs along that axis of ``values`` and the reduction is vectorized over
    the remaining axes. Returns -inf when every weight is zero.
    """
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if axis is None:
        mask = w > 0
        if not mask.any():
            return -np.inf
        vm = v[mask]
        shift = vm.max()
        return float(shift + np.log(np.dot(w[mask], np.exp(vm - shift))))
    w_shape = [1] * v.ndim
    w_shape[axis] = w.size
    wb = w.reshape(w_shape)
    masked = np.where(wb > 0, v, -np.inf)
    shift = masked.max(axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(wb * np.exp(masked - shift), axis=axis))
    return out + np.squeeze(shift, axis=axis)


def phi_prime_inf(spec):
    """Recession slope lim phi(x)/x; prices mass placed where nu vanishes."""
    if isinstance(spec, KL) or isinstance(spec, Balanced):
        return np.inf
    if isinstance(spec, Berg):
        return spec.rho
    raise UnsupportedEntropyError(f"unknown entropy {spec!r}")


def divergence(spec, mu, nu):
    """Csiszar divergence sum_{nu_i>0} phi(mu_i/nu_i) nu_i + phi'_inf sum_{nu_i=0} mu_i.

    Returns +inf as soon as an infinite term appears (Balanced with mu != nu,
    KL with mass where nu vanishes, Berg with nu positive but mu zero). The
    Balanced indicator compares with relative tolerance 1e-9 so that plans
    assembled in floating point still count as feasible.
    """
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.shape != nu.shape:
        raise ValueError("mu and nu must have equal length")
    if np.any(mu < 0) or np.any(nu < 0):
        raise ValueError("weights must be nonnegative")

    if isinstance(spec, Balanced):
        scale = 1.0 + float(np.abs(nu).max(initial=0.0))
        return 0.0 if float(np.abs(mu - nu).max(initial=0.0)) <= _BALANCED_EQ_TOL * scale else np.inf

    pos = nu > 0
    sing = float(mu[~pos].sum())
    if isinstance(spec, KL):
        if sing > 0:
            return np.inf
        m, n = mu[pos], nu[pos]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(m > 0, m * np.log(np.where(m > 0, m / n, 1.0)), 0.0)
        return float(spec.rho * (terms.sum() - m.sum() + n.sum()))
    if isinstance(spec, Berg):
        m, n = mu[pos], nu[pos]
        if np.any(m == 0):
            return np.inf
        terms = m - n - n * np.log(m / n)
        return float(spec.rho * (terms.sum() + sing))
    raise UnsupportedEntropyError(f"unknown entropy {spec!r}")


def conj(spec, x):
    """Legendre transform phi*(x); accepts scalars or arrays."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(spec, KL):
        out = spec.rho * np.expm1(x / spec.rho)
    elif isinstance(spec, Berg):
        if np.any(x >= spec.rho):
            raise ValueError("Berg conjugate requires x < rho")
        out = -spec.rho * np.log1p(-x / spec.rho)
    elif isinstance(spec, Balanced):
        out = x + 0.0
    else:
        raise UnsupportedEntropyError(f"unknown entropy {spec!r}")
    return float(out) if out.ndim == 0 else out


def conj_grad(spec, x):
    """Derivative of the conjugate, the reweighting factor of the marginals."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(spec, KL):
        out = np.exp(x / spec.rho)
    elif isinstance(spec, Berg):
        if np.any(x >= spec.rho):
            raise ValueError("Berg conjugate requires x < rho")
        out = spec.rho / (spec.rho - x)
    elif isinstance(spec, Balanced):
        out = np.ones_like(x)
    else:
        raise UnsupportedEntropyError(f"unknown entropy {spec!r}")
    return float(out) if out.ndim == 0 else out


def conj_hess(spec, x):
    """Second derivative of the conjugate (used by scalar Newton solves)."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(spec, KL):
        out = np.exp(x / spec.rho) / spec.rho
    elif isinstance(spec, Berg):
        out = spec.rho / (spec.rho - x) ** 2
    elif isinstance(spec, Balanced):
        out = np.zeros_like(x)
    else:
        raise UnsupportedEntropyError(f"unknown entropy {spec!r}")
    return float(out) if out.ndim == 0 else out


def softmin(a, eps, f):
    """Smoothed minimum -eps log <a, e^(-f/eps)> over the measure's weights.

    Equivariant under constant shifts of ``f`` (up to rounding) and bounded
    above by min f_i + eps log m(a) over the positive-weight entries.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    f = np.asarray(f, dtype=np.float64)
    if f.shape != a.weights.shape:
        raise ValueError("potential length must match the measure")
    if not np.all(np.isfinite(f)):
        raise ValueError("potential must be finite")
    return -eps * logdotexp(-f / eps, a.weights)


def aprox(spec, eps, x):
    """Anisotropic proximity operator argmin_y eps e^((x-y)/eps) + phi*(y).

    KL scales by rho/(eps+rho), Balanced is the identity, and Berg solves
    the scalar stationarity equation y + eps log(rho/(rho-y)) = x with a
    bisection-safeguarded Newton iteration to |residual| < 1e-12.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    if isinstance(spec, KL):
        out = (spec.rho / (eps + spec.rho)) * x
    elif isinstance(spec, Balanced):
        out = x + 0.0
    elif isinstance(spec, Berg):
        out = _berg_aprox(spec.rho, eps, np.atleast_1d(x)).reshape(x.shape)
    else:
        raise UnsupportedEntropyError(f"unknown entropy {spec!r}")
    return float(out) if out.ndim == 0 else out


def _berg_aprox(rho, eps, x, tol=1e-12, max_iters=100):
    # h(y) = y + eps log(rho / (rho - y)) - x is strictly increasing on
    # (-inf, rho) with range all of R, so the root exists and is unique.
    def h(y):
        return y + eps * np.log(rho / (rho - y)) - x

    lo = np.minimum(x, rho - 1.0)
    step = np.maximum(1.0, eps)
    for _ in range(200):
        bad = h(lo) > 0
        if not bad.any():
            break
        lo = np.where(bad, lo - step, lo)
        step = step * 2
    top = np.nextafter(rho, -np.inf)  # largest representable point below rho
    gap = rho - np.minimum(x, rho - 1.0)
    hi = np.minimum(rho - gap, top)
    for _ in range(200):
        bad = h(hi) < 0
        if not (bad & (hi < top)).any():
            break
        gap = np.where(bad, gap / 4, gap)
        hi = np.minimum(rho - gap, top)

    y = np.clip(np.minimum(x, rho - gap), lo, hi)
    eps_mach = np.finfo(np.float64).eps
    for _ in range(max_iters):
        res = h(y)
        # a bracket collapsed to one ulp means the root is resolved to full
        # float precision even when the residual target is unreachable
        # (h is steep near the domain edge)
        resolved = (hi - lo) <= 4 * eps_mach * (1.0 + np.abs(y))
        if np.all((np.abs(res) < tol) | resolved):
            return y
        lo = np.where(res < 0, y, lo)
        hi = np.where(res > 0, y, hi)
        newton = y - res / (1.0 + eps / (rho - y))
        inside = (newton > lo) & (newton < hi)
        y = np.where(inside, newton, 0.5 * (lo + hi))
    raise NewtonError("Berg aprox Newton did not reach |residual| < 1e-12")
