"""Coverage probability and scaled expected volume of a recentred sphere.

Both are functions of ``gamma = ||theta||`` only. With ``theta`` along the
first axis, write ``X`` in polar form ``(R, U)`` where ``U`` is the cosine of
the angle between ``X`` and ``theta``. For odd ``p`` the joint density is

    kappa_p r**(p-1) exp(-(r**2 + gamma**2)/2) exp(gamma r u) (1 - u**2)**m,

with ``m = (p - 3)/2``, so coverage reduces to a one-dimensional integral in
``r`` of an angular integral that has a closed form. Internally the angular
integral is carried with the factor ``exp(-gamma r)`` pulled out, which keeps
everything finite for large ``gamma r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .distributions import NoncentralChi2, chi2_cdf, nc_chi2_cdf, nc_chi2_pdf, nc_chi2_sf
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, QuadratureError, integrate
from .sphere import RadiusFunction, RcsSpec, a_plus, radius_eval

BETA_SWITCH = 1e-3
TAIL_WIDTH = 9.0


class PerformanceError(QuadratureError):
    """A quadrature piece failed to converge."""

    def __init__(self, message, gamma=None, piece=None):
        super().__init__(message)
        self.gamma = gamma
        self.piece = piece


@dataclass(frozen=True)
class AngularIntegralParams:
    m: int
    beta: float
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ValueError("m must be a nonnegative integer")
        if not -1.0 <= self.lo <= self.hi <= 1.0:
            raise ValueError("need -1 <= lo <= hi <= 1")


class PerformanceCurve(NamedTuple):
    gamma: np.ndarray
    value: np.ndarray
    kind: str


def kappa(p: int) -> float:
    """Normalising constant of the (R, U) joint density."""
    return 1.0 / (2.0 ** ((p - 2) / 2) * math.gamma((p - 1) / 2) * math.sqrt(math.pi))


# ---------------------------------------------------------------------------
# angular integral


def _binomial_coeffs(m: int) -> np.ndarray:
    # (2 - v)**m = sum_j c_j v**j
    return np.array([math.comb(m, j) * 2.0 ** (m - j) * (-1) ** j for j in range(m + 1)])


def _decay_moments(n_max: int, beta, s):
    """``I_n = int_0^s v**n exp(-beta v) dv`` for n = 0..n_max; rows indexed by n."""
    x = beta * s
    e = np.exp(-x)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = -np.expm1(-x) / beta
    if n_max == 0:
        return out
    fwd = x > n_max
    if np.any(fwd):
        b, sf, ef = beta[fwd], s[fwd], e[fwd]
        for n in range(1, n_max + 1):
            out[n, fwd] = (n * out[n - 1, fwd] - sf**n * ef) / b
    bwd = ~fwd
    if np.any(bwd):
        b, sb, xb, eb = beta[bwd], s[bwd], x[bwd], e[bwd]
        a = n_max + 1.0
        term = np.full_like(xb, 1.0 / a)
        total = term.copy()
        for k in range(1, 400):
            term = term * xb / (a + k)
            total += term
            if np.all(term <= 1e-17 * total):
                break
        out[n_max, bwd] = sb ** (n_max + 1) * eb * total
        for n in range(n_max, 1, -1):
            out[n - 1, bwd] = (b * out[n, bwd] + sb**n * eb) / n
    return out


def _growth_moments(n_max: int, beta, w):
    """``L_n = exp(-beta w) int_0^w v**n exp(beta v) dv`` for n = 0..n_max."""
    x = beta * w
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = -np.expm1(-x) / beta
    if n_max == 0:
        return out
    fwd = x > n_max
    if np.any(fwd):
        b, wf = beta[fwd], w[fwd]
        for n in range(1, n_max + 1):
            out[n, fwd] = (wf**n - n * out[n - 1, fwd]) / b
    bwd = ~fwd
    if np.any(bwd):
        b, wb, xb = beta[bwd], w[bwd], x[bwd]
        # exp(-x) sum_k x**k / (k! (n_max + k + 1))
        fact = np.exp(-xb)
        total = fact / (n_max + 1.0)
        for k in range(1, 400):
            fact = fact * xb / k
            term = fact / (n_max + k + 1.0)
            total += term
            if np.all(term <= 1e-17 * total):
                break
        out[n_max, bwd] = wb ** (n_max + 1) * total
        for n in range(n_max, 1, -1):
            out[n - 1, bwd] = (wb**n - b * out[n, bwd]) / n
    return out


def _tail_by_quadrature(m: int, beta: float, t: float, cfg: QuadratureConfig) -> float:
    res = integrate(lambda u: np.exp(beta * (u - 1.0)) * (1.0 - u * u) ** m, t, 1.0, cfg)
    if not res.converged:
        raise PerformanceError(f"angular quadrature did not converge (beta={beta}, t={t})")
    return res.value


def scaled_angular_tail(m: int, beta, t, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """``int_t^1 exp(beta (u - 1)) (1 - u**2)**m du`` for beta >= 0, t in [-1, 1].

    Closed form for ``beta >= BETA_SWITCH`` via ``v = 1 - u`` (or ``w = 1 + u``
    on the negative half), progressive Simpson below it.
    """
    beta, t = np.broadcast_arrays(np.asarray(beta, dtype=float), np.asarray(t, dtype=float))
    shape = beta.shape
    beta = beta.ravel()
    t = np.clip(t.ravel(), -1.0, 1.0)
    out = np.empty(beta.shape)
    small = beta < BETA_SWITCH
    for i in np.flatnonzero(small):
        out[i] = _tail_by_quadrature(m, beta[i], t[i], cfg)
    big = ~small
    if np.any(big):
        b, tb = beta[big], t[big]
        coeffs = _binomial_coeffs(m)
        s = 1.0 - np.maximum(tb, 0.0)
        val = coeffs @ _decay_moments(2 * m, b, s)[m:]
        neg = tb < 0
        if np.any(neg):
            bn = b[neg]
            w0 = 1.0 + tb[neg]
            whole = _growth_moments(2 * m, bn, np.ones_like(bn))[m:]
            part = _growth_moments(2 * m, bn, w0)[m:]
            k = np.exp(-bn) * whole - np.exp(-bn * (2.0 - w0)) * part
            val[neg] += coeffs @ k
        out[big] = val
    return out.reshape(shape)


def angular_integral(params: AngularIntegralParams, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``G = int_lo^hi exp(beta u) (1 - u**2)**m du``."""
    m, beta, lo, hi = params.m, params.beta, params.lo, params.hi
    if abs(beta) < BETA_SWITCH:
        # rounding in (1 - u*u)**m is about m*eps*max(1 - u*u)**(m - 1); on slivers
        # next to u = +-1 the integral itself is that small, so the relative test
        # can never pass and an absolute one at the rounding level is used
        base = 1.0 if lo <= 0.0 <= hi else 1.0 - min(lo * lo, hi * hi)
        noise = 10.0 * np.finfo(float).eps * max(m, 1) * base ** max(m - 1, 0)
        floor = max(cfg.abs_floor, noise * (hi - lo) * math.exp(abs(beta)))
        res = integrate(lambda u: np.exp(beta * u) * (1.0 - u * u) ** m, lo, hi, replace(cfg, abs_floor=floor))
        if not res.converged:
            raise PerformanceError("angular quadrature did not converge")
        return res.value
    if beta < 0:
        beta, lo, hi = -beta, -hi, -lo
    tails = scaled_angular_tail(m, beta, np.array([lo, hi]), cfg)
    if tails[1] <= 0.5 * tails[0]:
        return float(math.exp(beta) * (tails[0] - tails[1]))
    # the two tails nearly cancel: anchor at hi instead, with v = hi - u,
    # (1 - (hi - v)**2)**m expanded as a polynomial in v
    coeffs = np.polynomial.polynomial.polypow([1.0 - hi * hi, 2.0 * hi, -1.0], m)
    moments = _decay_moments(2 * m, np.array([beta]), np.array([hi - lo]))[:, 0]
    return float(math.exp(beta * hi) * (coeffs @ moments))


# ---------------------------------------------------------------------------
# coverage probability


def _radial_range(p: int, gamma: float) -> tuple[float, float]:
    return max(0.0, gamma - TAIL_WIDTH), gamma + max(TAIL_WIDTH, math.sqrt(2.0 * p))


def _shrunk_norm(r, p):
    # a_plus(T) * r with T = r / sqrt(p): zero up to sqrt(p - 2), then r - (p - 2)/r
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(r * r > p - 2, r - (p - 2) / np.where(r > 0, r, 1.0), 0.0)


def _acceptance(radius: RadiusFunction, gamma: float, r):
    """Status (0 none, 1 partial, 2 full) and lower cosine limit at radii ``r``."""
    p = radius.p
    r = np.asarray(r, dtype=float)
    b = np.asarray(radius_eval(radius, r / math.sqrt(p)), dtype=float)
    c = _shrunk_norm(r, p)
    status = np.zeros(r.shape, dtype=int)
    lower = np.full(r.shape, -1.0)
    zero = c <= 0
    status[zero & (gamma <= b)] = 2
    pos = ~zero
    if np.any(pos):
        cp, bp = c[pos], b[pos]
        with np.errstate(over="ignore", divide="ignore"):
            # denormal gamma sends ell to +-inf, which the status rule handles
            ell = (cp * cp + gamma * gamma - bp * bp) / (2.0 * cp * gamma)
        st = np.where(ell >= 1.0, 0, np.where(ell <= -1.0, 2, 1))
        status[pos] = st
        lower[pos] = np.clip(ell, -1.0, 1.0)
    return status, lower


def _roots(g: Callable, lo: float, hi: float, extra: Sequence[float] = (), n: int = 200) -> list[float]:
    if hi <= lo:
        return []
    grid = np.union1d(np.linspace(lo, hi, n), [v for v in extra if lo < v < hi])
    vals = g(grid)
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        roots.append(brentq(lambda v: float(g(np.array([v]))[0]), grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15))
    roots.extend(float(grid[i]) for i in np.flatnonzero(vals == 0))
    return roots


def coverage_breakpoints(radius: RadiusFunction, gamma: float) -> list[float]:
    """Radii splitting the outer integral into pieces on which the integrand is smooth."""
    p = radius.p
    lo, hi = _radial_range(p, gamma)
    root_p = math.sqrt(p)
    r0 = math.sqrt(p - 2)
    kinks = [x * root_p for x in radius.breakpoints()]
    pts = {lo, hi}
    pts.update(v for v in kinks + [r0] if lo < v < hi)

    def b_of(r):
        return np.asarray(radius_eval(radius, r / root_p), dtype=float)

    pts.update(_roots(lambda r: b_of(r) - gamma, lo, min(r0, hi), kinks))
    start = max(lo, r0)
    for fn in (
        lambda r: _shrunk_norm(r, p) - gamma + b_of(r),
        lambda r: _shrunk_norm(r, p) - gamma - b_of(r),
        lambda r: _shrunk_norm(r, p) + gamma - b_of(r),
    ):
        pts.update(_roots(fn, start, hi, kinks))
    return sorted(pts)


def _coverage_zero(radius: RadiusFunction) -> float:
    # gamma = 0: accept iff ||a_plus(T) X|| <= b(T); R**2 is central chi-square
    p, d = radius.p, radius.d
    r0 = math.sqrt(p - 2)
    r_top = 0.5 * (d + math.sqrt(d * d + 4.0 * (p - 2))) + 1.0
    root_p = math.sqrt(p)
    kinks = [x * root_p for x in radius.breakpoints()]

    def g(r):
        return _shrunk_norm(r, p) - np.asarray(radius_eval(radius, r / root_p), dtype=float)

    edges = sorted({r0, r_top, *_roots(g, r0, r_top, kinks)})
    total = float(chi2_cdf(r0 * r0, p))
    for a, b in zip(edges[:-1], edges[1:]):
        if g(np.array([0.5 * (a + b)]))[0] <= 0:
            total += float(chi2_cdf(b * b, p) - chi2_cdf(a * a, p))
    return total


def _log_radial_weight(p, gamma, r):
    with np.errstate(divide="ignore"):
        return math.log(kappa(p)) + (p - 1) * np.log(r) - 0.5 * (r - gamma) ** 2


def coverage_probability(spec: RcsSpec | RadiusFunction, gamma: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Coverage probability of the sphere when ``||theta|| = gamma``.

    Pieces on which every direction is accepted are integrated exactly with
    the noncentral chi-square cdf; pieces with partial acceptance use
    progressive Simpson on the polar form.
    """
    radius = spec.radius if isinstance(spec, RcsSpec) else spec
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if gamma == 0:
        return _coverage_zero(radius)
    p = radius.p
    m = (p - 3) // 2
    dist = NoncentralChi2(p, gamma * gamma)
    edges = coverage_breakpoints(radius, gamma)
    mids = 0.5 * (np.array(edges[:-1]) + np.array(edges[1:]))
    status, _ = _acceptance(radius, gamma, mids)

    def integrand(r):
        st, lower = _acceptance(radius, gamma, r)
        out = np.zeros(r.shape)
        keep = (st > 0) & (r > 0)
        if np.any(keep):
            rk = r[keep]
            tail = scaled_angular_tail(m, gamma * rk, lower[keep], cfg)
            out[keep] = np.exp(_log_radial_weight(p, gamma, rk)) * tail
        return out

    total = 0.0
    for (a, b), st in zip(zip(edges[:-1], edges[1:]), status):
        if st == 0 or b <= a:
            continue
        if st == 2:
            total += float(nc_chi2_cdf(b * b, dist) - nc_chi2_cdf(a * a, dist))
            continue
        res = integrate(integrand, a, b, cfg)
        if not res.converged:
            raise PerformanceError(
                f"coverage quadrature did not converge at gamma={gamma} on [{a}, {b}]", gamma, (a, b)
            )
        total += res.value
    return min(max(total, 0.0), 1.0)


def polar_mass(p: int, gamma: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Total mass of the (R, U) joint density, i.e. coverage with every point accepted."""
    m = (p - 3) // 2
    lo, hi = _radial_range(p, gamma)

    def integrand(r):
        out = np.zeros(r.shape)
        pos = r > 0
        rp = r[pos]
        tail = scaled_angular_tail(m, gamma * rp, np.full(rp.shape, -1.0), cfg)
        out[pos] = np.exp(_log_radial_weight(p, gamma, rp)) * tail
        return out

    edges = sorted({lo, hi, *(v for v in (gamma, math.sqrt(p)) if lo < v < hi)})
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        res = integrate(integrand, a, b, cfg)
        if not res.converged:
            raise PerformanceError("normalisation quadrature did not converge", gamma, (a, b))
        total += res.value
    return total


# ---------------------------------------------------------------------------
# scaled expected volume


def _radial_density(p: int, gamma: float, r):
    # density of R = ||X||: 2 r f(r**2; p, gamma**2)
    return 2.0 * r * nc_chi2_pdf(r * r, NoncentralChi2(p, gamma * gamma))


def _sev_piece(b_fn, p, d, gamma, a, b, cfg):
    def integrand(r):
        return (b_fn(r / math.sqrt(p)) / d) ** p * _radial_density(p, gamma, r)

    res = integrate(integrand, a, b, cfg)
    if not res.converged:
        raise PerformanceError(f"SEV quadrature did not converge at gamma={gamma} on [{a}, {b}]", gamma, (a, b))
    return res.value


def sev(spec: RcsSpec | RadiusFunction, gamma: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Scaled expected volume ``E[(b(T)/d)**p]`` at ``||theta|| = gamma``.

    The range below ``T = k`` is integrated knot interval by knot interval;
    above ``k`` the radius equals ``d`` and contributes the chi-square tail.
    The Casella-Hwang radius never reaches ``d``, so for it the quadrature is
    carried out to where the remaining tail mass is below 1e-17.
    """
    radius = spec.radius if isinstance(spec, RcsSpec) else spec
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    p, d, k = radius.p, radius.d, radius.k
    if radius.kind == "constant":
        return 1.0
    root_p = math.sqrt(p)
    dist = NoncentralChi2(p, gamma * gamma)
    top = k
    if radius.kind == "casella_hwang":
        # this radius only approaches d asymptotically, so integrate past k
        # until the remaining mass is negligible
        while float(nc_chi2_sf(p * top * top, dist)) > 1e-17:
            top += 1.0
    xs = sorted({0.0, top, *(x for x in radius.breakpoints() if 0 < x < top)})
    b_fn = lambda x: radius_eval(radius, x)  # noqa: E731
    total = 0.0
    for a, b in zip(xs[:-1], xs[1:]):
        flat = _flat_value(radius, a, b)
        if flat is None:
            total += _sev_piece(b_fn, p, d, gamma, a * root_p, b * root_p, cfg)
        else:
            total += (flat / d) ** p * _chi2_mass(dist, p * a * a, p * b * b)
    return total + float(nc_chi2_sf(p * top * top, dist))


def _chi2_mass(dist: NoncentralChi2, lo: float, hi: float) -> float:
    # difference taken on whichever side of the median keeps it small
    if float(nc_chi2_cdf(lo, dist)) < 0.5:
        return float(nc_chi2_cdf(hi, dist)) - float(nc_chi2_cdf(lo, dist))
    return float(nc_chi2_sf(lo, dist)) - float(nc_chi2_sf(hi, dist))


def _flat_value(radius: RadiusFunction, a: float, b: float):
    # a hermite segment with equal end values and zero end slopes is constant
    if radius.kind != "hermite":
        return None
    s = radius.spline
    i = int(np.searchsorted(s.knots, a, side="right")) - 1
    if i < 0 or i + 1 >= s.knots.size or s.knots[i] != a or s.knots[i + 1] != b:
        return None
    if s.values[i] == s.values[i + 1] and s.slopes[i] == 0 and s.slopes[i + 1] == 0:
        return float(s.values[i])
    return None


def sev_single_domain(
    radius: RadiusFunction | Callable,
    gamma: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    *,
    p: int | None = None,
    d: float | None = None,
    k: float | None = None,
) -> float:
    """``E[(b(T)/d)**p]`` as one quadrature over ``[0, p k**2]`` plus the chi-square tail.

    With ``k=None`` and a plain callable ``b`` the quadrature runs out to where
    the remaining tail mass is below 1e-17 and no cap is assumed.
    """
    if isinstance(radius, RadiusFunction):
        p, d, k = radius.p, radius.d, radius.k if k is None else k
        b_fn = lambda x: radius_eval(radius, x)  # noqa: E731
        cap = True
    else:
        b_fn = lambda x: np.broadcast_to(np.asarray(radius(x), dtype=float), np.shape(x))  # noqa: E731
        cap = k is not None
    dist = NoncentralChi2(p, gamma * gamma)
    if cap:
        r_hi = k * math.sqrt(p)
    else:
        r_hi = math.sqrt(gamma * gamma + p) + 2.0
        while float(nc_chi2_sf(r_hi * r_hi, dist)) > 1e-17:
            r_hi += 2.0
    value = _sev_piece(b_fn, p, d, gamma, 0.0, r_hi, cfg)
    if cap:
        value += float(nc_chi2_sf(r_hi * r_hi, dist))
    return value


# ---------------------------------------------------------------------------
# curves and diagnostics


def curve(
    spec: RcsSpec | RadiusFunction,
    gammas,
    kind: str = "coverage",
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> PerformanceCurve:
    """Coverage or SEV evaluated at each gamma."""
    if kind not in ("coverage", "sev"):
        raise ValueError("kind must be 'coverage' or 'sev'")
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas < 0):
        raise ValueError("gammas must be nonnegative")
    fn = coverage_probability if kind == "coverage" else sev
    values = np.empty(gammas.shape)
    for i, g in enumerate(gammas):
        try:
            values[i] = fn(spec, float(g), cfg)
        except PerformanceError as exc:
            raise PerformanceError(f"element {i}: {exc}", exc.gamma, exc.piece) from exc
    return PerformanceCurve(gammas, values, kind)


def acceptance_interval_diagnostic(
    spec: RcsSpec | RadiusFunction,
    gamma: float,
    resolution: float = 1e-3,
    n_directions: int = 201,
) -> bool:
    """True iff, for every cosine ``u`` on a grid, the accepted radii form one interval.

    The accepted set at direction ``u`` is
    ``{r : a**2 r**2 - 2 a r gamma u + gamma**2 <= b(r/sqrt(p))**2}``; an empty
    set counts as an interval.
    """
    radius = spec.radius if isinstance(spec, RcsSpec) else spec
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    p = radius.p
    _, r_max = _radial_range(p, gamma)
    r = np.arange(resolution, r_max + resolution / 2, resolution)
    b = np.asarray(radius_eval(radius, r / math.sqrt(p)), dtype=float)
    c = _shrunk_norm(r, p)
    for u in np.linspace(-1.0, 1.0, n_directions):
        ok = c * c - 2.0 * c * gamma * u + gamma * gamma <= b * b
        idx = np.flatnonzero(ok)
        if idx.size and idx[-1] - idx[0] + 1 != idx.size:
            return False
    return True
