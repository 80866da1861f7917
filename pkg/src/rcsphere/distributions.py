"""Central and noncentral chi-square distributions.

Everything here is vectorised over the evaluation point ``y``; the degrees of
freedom and noncentrality are scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

_EPS = 1e-17
_MAX_ITER = 2000


@dataclass(frozen=True)
class NoncentralChi2:
    """Noncentral chi-square law with ``dof`` degrees of freedom.

    ``noncentrality`` is the squared norm of the mean vector (gamma**2).
    """

    dof: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 1:
            raise ValueError(f"dof must be a positive integer, got {self.dof}")
        if not self.noncentrality >= 0:
            raise ValueError(f"noncentrality must be >= 0, got {self.noncentrality}")

    def pdf(self, y):
        return nc_chi2_pdf(y, self)

    def cdf(self, y):
        return nc_chi2_cdf(y, self)


_lgamma = np.vectorize(math.lgamma, otypes=[float])

# coefficients of the Stirling series for lgamma(a + 1) - (a log a - a + log(2 pi a) / 2)
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360, 1 / 156)
_STIRLING_MIN = 10.0


def log_gamma_kernel(a, x):
    """``a*log(x) - x - lgamma(a + 1)`` without cancellation for large ``a``.

    For ``a >= 10`` the expression is rewritten as
    ``a*(log1p(t) - t) - log(2*pi*a)/2 - stirlerr(a)`` with ``t = (x - a)/a``,
    which never subtracts numbers of size ``a*log(x)``.
    """
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    out = np.empty(a.shape)
    big = a >= _STIRLING_MIN
    with np.errstate(divide="ignore", invalid="ignore"):
        sm = ~big
        if np.any(sm):
            out[sm] = a[sm] * np.log(x[sm]) - x[sm] - _lgamma(a[sm] + 1.0)
        if np.any(big):
            ab = a[big]
            t = (x[big] - ab) / ab
            inv = 1.0 / ab
            inv2 = inv * inv
            corr = np.zeros_like(ab)
            for c in reversed(_STIRLING):
                corr = corr * inv2 + c
            out[big] = ab * (np.log1p(t) - t) - 0.5 * np.log(2.0 * math.pi * ab) - corr * inv
    # x = 0: the power term vanishes for a > 0 and is 1 for a = 0
    out = np.where(x == 0, np.where(a == 0, 0.0, np.where(a > 0, -np.inf, np.inf)), out)
    return out if out.ndim else float(out)


def _gamma_series(a, x):
    # P(a, x) by the power series; good for x < a + 1
    x = np.asarray(x, dtype=float)
    term = np.full_like(x, 1.0 / a)
    total = term.copy()
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term = term * x / ap
        total += term
        if np.all(term <= np.abs(total) * _EPS):
            break
    return total * np.exp(log_gamma_kernel(a, x) + math.log(a))


def _gamma_cf(a, x):
    # Q(a, x) by the Legendre continued fraction (modified Lentz); x >= a + 1
    x = np.asarray(x, dtype=float)
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= 1e-16):
            break
    return np.exp(log_gamma_kernel(a, x) + math.log(a)) * h


def gammainc_lower(a: float, x):
    """Regularised lower incomplete gamma function P(a, x).

    Series below ``x = a + 1``, continued fraction above.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    out = np.zeros_like(x)
    small = (x > 0) & (x < a + 1.0)
    large = x >= a + 1.0
    if np.any(small):
        out[small] = _gamma_series(a, x[small])
    if np.any(large):
        out[large] = 1.0 - _gamma_cf(a, x[large])
    return out if out.ndim else float(out)


def gammainc_upper(a: float, x):
    """Regularised upper incomplete gamma function Q(a, x) = 1 - P(a, x)."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    small = (x > 0) & (x < a + 1.0)
    large = x >= a + 1.0
    if np.any(small):
        out[small] = 1.0 - _gamma_series(a, x[small])
    if np.any(large):
        out[large] = _gamma_cf(a, x[large])
    return out if out.ndim else float(out)


def chi2_logpdf(y, dof):
    """Log density of the central chi-square law (vectorised over y and dof)."""
    y = np.asarray(y, dtype=float)
    dof = np.asarray(dof, dtype=float)
    out = log_gamma_kernel(0.5 * dof - 1.0, 0.5 * y) - math.log(2.0)
    return np.asarray(out)


def chi2_cdf(y, dof):
    y = np.asarray(y, dtype=float)
    return gammainc_lower(0.5 * dof, 0.5 * np.maximum(y, 0.0))


def chi2_sf(y, dof):
    y = np.asarray(y, dtype=float)
    return gammainc_upper(0.5 * dof, 0.5 * np.maximum(y, 0.0))


def poisson_weight_range(mean: float, rel: float = 1e-16) -> tuple[int, np.ndarray]:
    """Poisson(mean) weights over the index window holding all but ``rel`` of the mass.

    The window is grown outwards from the mode so that no leading weight
    underflows, however large the mean. Returns ``(first_index, weights)``.
    """
    if mean == 0:
        return 0, np.ones(1)
    mode = int(math.floor(mean))

    def logw(j):
        return -mean + j * math.log(mean) - math.lgamma(j + 1.0)

    top = logw(mode)
    cut = top + math.log(rel) - 5.0
    lo = mode
    while lo > 0 and logw(lo - 1) > cut:
        lo -= 1
    hi = mode
    while logw(hi + 1) > cut:
        hi += 1
    j = np.arange(lo, hi + 1, dtype=float)
    w = np.exp(log_gamma_kernel(j, mean))
    # the dropped mass is below rel, so renormalising only removes the
    # rounding error that lgamma accumulates at large indices
    return lo, w / w.sum()


def nc_chi2_pdf(y, dist: NoncentralChi2):
    """Density f(y; p, gamma**2) as a Poisson mixture of central densities."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    lam = dist.noncentrality
    if lam == 0:
        return np.exp(chi2_logpdf(y, dist.dof))
    lo, w = poisson_weight_range(0.5 * lam)
    dofs = dist.dof + 2.0 * np.arange(lo, lo + w.size)
    flat = np.atleast_1d(y)
    logf = chi2_logpdf(flat[:, None], dofs[None, :])
    out = np.exp(logf + np.log(w)[None, :]).sum(axis=1)
    return out.reshape(y.shape) if y.ndim else float(out[0])


def nc_chi2_cdf(y, dist: NoncentralChi2):
    """Distribution function F(y; p, gamma**2) as a Poisson mixture of central cdfs.

    The central cdfs for the whole index window come from one incomplete
    gamma evaluation at the top index plus the downward recurrence
    P(a, x) = P(a + 1, x) + x**a exp(-x) / Gamma(a + 1), which only adds
    positive terms.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    lam = dist.noncentrality
    if lam == 0:
        return chi2_cdf(y, dist.dof)
    lo, w = poisson_weight_range(0.5 * lam)
    flat = np.atleast_1d(y)
    x = 0.5 * flat
    a = 0.5 * dist.dof + np.arange(lo, lo + w.size, dtype=float)
    top = np.atleast_1d(gammainc_lower(a[-1], x))
    # increments[i, j] = x**a_j exp(-x) / Gamma(a_j + 1), for j below the top index
    incr = np.exp(log_gamma_kernel(a[None, :-1], x[:, None]))
    # P_j = P_top + sum_{i >= j} incr_i
    tails = np.cumsum(incr[:, ::-1], axis=1)[:, ::-1]
    P = np.concatenate([top[:, None] + tails, top[:, None]], axis=1)
    out = np.clip(P @ w, 0.0, 1.0)
    return out.reshape(y.shape) if y.ndim else float(out[0])


def nc_chi2_sf(y, dist: NoncentralChi2):
    """Upper tail 1 - F(y; p, gamma**2), accurate when it is tiny."""
    y = np.asarray(y, dtype=float)
    lam = dist.noncentrality
    if lam == 0:
        return chi2_sf(y, dist.dof)
    lo, w = poisson_weight_range(0.5 * lam)
    flat = np.atleast_1d(y)
    x = 0.5 * flat
    a = 0.5 * dist.dof + np.arange(lo, lo + w.size, dtype=float)
    bottom = np.atleast_1d(gammainc_upper(a[0], x))
    # Q(a + 1, x) = Q(a, x) + x**a exp(-x) / Gamma(a + 1)
    incr = np.exp(log_gamma_kernel(a[None, :-1], x[:, None]))
    Q = np.concatenate([bottom[:, None], bottom[:, None] + np.cumsum(incr, axis=1)], axis=1)
    out = np.clip(Q @ w, 0.0, 1.0)
    return out.reshape(y.shape) if y.ndim else float(out[0])


def chi2_quantile(dof: int, prob: float) -> float:
    """Quantile of the central chi-square law by bisection on the cdf.

    Seeded with the Wilson-Hilferty approximation, then bracketed and bisected
    until the bracket is below 1e-14 relative.
    """
    if int(dof) != dof or dof < 1:
        raise ValueError(f"dof must be a positive integer, got {dof}")
    if not 0.0 < prob < 1.0:
        raise ValueError(f"prob must lie in (0, 1), got {prob}")
    z = _normal_quantile(prob)
    h = 2.0 / (9.0 * dof)
    guess = dof * max(1.0 - h + z * math.sqrt(h), 1e-3) ** 3

    def cdf(v):
        return float(chi2_cdf(v, dof))

    lo = hi = guess
    while cdf(lo) > prob:
        lo *= 0.5
    while cdf(hi) < prob:
        hi *= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < prob:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def _normal_quantile(prob: float) -> float:
    # only a seed for the bisection
    return NormalDist().inv_cdf(prob)
