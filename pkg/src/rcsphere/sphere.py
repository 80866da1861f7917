"""Recentred confidence spheres centred on the positive-part James-Stein estimator.

A sphere is ``{theta : ||a_plus(T) X - theta|| <= b(T)}`` with ``T = ||X|| / sqrt(p)``
and ``b`` a nondecreasing radius function capped at the standard radius ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import chi2_quantile
from .interpolation import HermiteSpline, build

DEFAULT_K = 10.0
KINDS = ("hermite", "casella_hwang", "constant")


def standard_radius(p: int, alpha: float) -> float:
    """Radius ``d`` of the standard sphere: ``P(chi2_p <= d**2) = 1 - alpha``."""
    return math.sqrt(chi2_quantile(p, 1.0 - alpha))


def _check_p(p):
    if int(p) != p or p < 3 or p % 2 == 0:
        raise ValueError(f"p must be an odd integer >= 3, got {p}")


def a_plus(x, p: int):
    """Positive-part James-Stein shrinkage factor ``max(0, 1 - (1 - 2/p)/x**2)``.

    Defined as 0 at ``x = 0``.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(x > 0, np.maximum(0.0, 1.0 - (1.0 - 2.0 / p) / (x * x)), 0.0)
    return out if out.ndim else float(out)


def ch_radius(x, p: int, d: float):
    """Empirical-Bayes radius of Casella and Hwang as a function of T."""
    if d * d <= p - 2:
        raise ValueError(f"need d**2 > p - 2, got d={d}, p={p}")
    x = np.asarray(x, dtype=float)
    # beyond d/sqrt(p) the shrink factor uses p x**2 in place of d**2
    s2 = np.maximum(p * x * x, d * d)
    shrink = 1.0 - (p - 2) / s2
    out = np.sqrt(shrink * (d * d - p * np.log(shrink)))
    return out if out.ndim else float(out)


def default_knots(p: int, d: float, k: float = DEFAULT_K) -> np.ndarray:
    """Seven knots: 0, d/sqrt(p), two equally spaced points, then k/2, 3k/4 and k."""
    first = d / math.sqrt(p)
    if k / 2 <= first:
        raise ValueError(f"need k/2 > d/sqrt(p), got k={k}, d/sqrt(p)={first}")
    c = (k / 2 - first) / 3
    return np.array([0.0, first, first + c, first + 2 * c, k / 2, 3 * k / 4, k])


@dataclass(frozen=True, eq=False)
class RadiusFunction:
    """Nondecreasing radius rule ``b`` on ``[0, inf)``, capped at ``d``.

    ``hermite`` radii are monotone cubic Hermite interpolants on ``[0, k]``
    whose last knot value is ``d``; beyond ``k`` they equal ``d``.
    """

    kind: str
    p: int
    d: float
    alpha: float
    k: float = DEFAULT_K
    spline: HermiteSpline | None = field(default=None, repr=False)
    # solvers probe non-monotone knot values; they switch validation off
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.validate:
            return
        if self.kind not in KINDS:
            raise ValueError(f"unknown radius kind {self.kind!r}")
        _check_p(self.p)
        if not self.d > 0:
            raise ValueError("d must be positive")
        if self.kind == "hermite":
            s = self.spline
            if s is None:
                raise ValueError("hermite radius needs a spline")
            if s.knots[0] != 0.0 or not math.isclose(s.knots[-1], self.k, rel_tol=0, abs_tol=1e-12):
                raise ValueError("hermite knots must run from 0 to k")
            if np.any(np.diff(s.values) < 0):
                raise ValueError("knot values must be nondecreasing")
            if s.values[0] <= 0 or np.any(s.values > self.d * (1 + 1e-12)):
                raise ValueError("knot values must lie in (0, d]")
            if not math.isclose(s.values[-1], self.d, rel_tol=1e-12):
                raise ValueError("last knot value must equal d")
        elif self.kind == "casella_hwang" and self.d ** 2 <= self.p - 2:
            raise ValueError("casella_hwang radius needs d**2 > p - 2")

    @property
    def knots(self) -> np.ndarray | None:
        return None if self.spline is None else self.spline.knots

    @property
    def values(self) -> np.ndarray | None:
        return None if self.spline is None else self.spline.values

    def __call__(self, x):
        return radius_eval(self, x)

    def breakpoints(self) -> list[float]:
        """Abscissae (in T units) where ``b`` may lose smoothness."""
        if self.kind == "hermite":
            return [float(v) for v in self.spline.knots]
        if self.kind == "casella_hwang":
            return [self.d / math.sqrt(self.p)]
        return []


def hermite_radius(
    p: int,
    alpha: float,
    knots,
    values,
    k: float | None = None,
    d: float | None = None,
    validate: bool = True,
) -> RadiusFunction:
    """Hermite radius through ``values`` at ``knots``; a missing last value is set to ``d``."""
    knots = np.asarray(knots, dtype=float)
    if d is None:
        d = standard_radius(p, alpha)
    if k is None:
        k = float(knots[-1])
    values = np.array(values, dtype=float)
    if values.size == knots.size - 1:
        values = np.append(values, d)
    return RadiusFunction("hermite", p, d, alpha, k, build(knots, values), validate)


def casella_hwang_radius(p: int, alpha: float, k: float = DEFAULT_K) -> RadiusFunction:
    return RadiusFunction("casella_hwang", p, standard_radius(p, alpha), alpha, k)


def constant_radius(p: int, alpha: float, k: float = DEFAULT_K) -> RadiusFunction:
    return RadiusFunction("constant", p, standard_radius(p, alpha), alpha, k)


def radius_eval(r: RadiusFunction, x):
    """Evaluate ``b(x)`` for x in T units (vectorised)."""
    x = np.asarray(x, dtype=float)
    if r.kind == "constant":
        out = np.full_like(x, r.d)
    elif r.kind == "casella_hwang":
        out = np.asarray(ch_radius(x, r.p, r.d), dtype=float)
    else:
        inside = x < r.k
        out = np.full_like(x, r.d)
        if np.any(inside):
            out[inside] = r.spline(np.maximum(x[inside], 0.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class RcsSpec:
    """A complete recentred confidence sphere for a p-variate normal mean."""

    radius: RadiusFunction

    @property
    def p(self) -> int:
        return self.radius.p

    @property
    def alpha(self) -> float:
        return self.radius.alpha

    @property
    def d(self) -> float:
        return self.radius.d

    def __post_init__(self):
        d = standard_radius(self.p, self.alpha)
        if not math.isclose(d, self.d, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"radius d={self.d} inconsistent with p={self.p}, alpha={self.alpha} (expected {d})")


def center(x, p: int):
    """Positive-part James-Stein estimate ``a_plus(T) x`` for rows of ``x``."""
    x = np.asarray(x, dtype=float)
    t = np.linalg.norm(x, axis=-1) / math.sqrt(p)
    return np.asarray(a_plus(t, p))[..., None] * x


def contains(spec: RcsSpec, x, theta) -> bool | np.ndarray:
    """Whether ``theta`` lies in the sphere computed from the observation ``x``.

    Both arguments may be stacks of p-vectors (last axis), broadcast together.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.shape[-1] != spec.p or theta.shape[-1] != spec.p:
        raise ValueError(f"vectors must have length p={spec.p}")
    t = np.linalg.norm(x, axis=-1) / math.sqrt(spec.p)
    dist = np.linalg.norm(center(x, spec.p) - theta, axis=-1)
    out = dist <= radius_eval(spec.radius, t)
    return bool(out) if np.ndim(out) == 0 else out
