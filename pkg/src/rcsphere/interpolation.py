"""Monotone piecewise cubic Hermite interpolation (Fritsch-Carlson slopes)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class HermiteSpline:
    knots: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __call__(self, x):
        return evaluate(self, x)

    def derivative(self, x):
        return evaluate(self, x, nu=1)


def _edge_slope(h0, h1, m0, m1):
    # one-sided three-point estimate, then clipped so the end segment stays monotone
    d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    if np.sign(d) != np.sign(m0):
        return 0.0
    if np.sign(m0) != np.sign(m1) and abs(d) > abs(3 * m0):
        return 3 * m0
    return d


def pchip_slopes(knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    h = np.diff(knots)
    secant = np.diff(values) / h
    n = knots.size
    slopes = np.zeros(n)
    if n == 2:
        slopes[:] = secant[0]
        return slopes
    for i in range(1, n - 1):
        s0, s1 = secant[i - 1], secant[i]
        if s0 == 0 or s1 == 0 or np.sign(s0) != np.sign(s1):
            slopes[i] = 0.0
            continue
        w1 = 2 * h[i] + h[i - 1]
        w2 = h[i] + 2 * h[i - 1]
        # weighted harmonic mean, written without 1/s so tiny secants cannot overflow
        slopes[i] = (w1 + w2) * s0 * s1 / (w1 * s1 + w2 * s0)
    slopes[0] = _edge_slope(h[0], h[1], secant[0], secant[1])
    slopes[-1] = _edge_slope(h[-1], h[-2], secant[-1], secant[-2])
    return slopes


def build(knots, values) -> HermiteSpline:
    """Build the monotone interpolant through ``(knots[i], values[i])``."""
    knots = np.array(knots, dtype=float)
    values = np.array(values, dtype=float)
    if knots.ndim != 1 or values.shape != knots.shape:
        raise ValueError("knots and values must be 1-d arrays of equal length")
    if knots.size < 2:
        raise ValueError("need at least two knots")
    if np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing")
    if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
        raise ValueError("knots and values must be finite")
    slopes = pchip_slopes(knots, values)
    for arr in (knots, values, slopes):
        arr.flags.writeable = False
    return HermiteSpline(knots, values, slopes)


def evaluate(s: HermiteSpline, x, nu: int = 0):
    """Value (``nu=0``) or first derivative (``nu=1``) of the spline at ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < s.knots[0]) or np.any(x > s.knots[-1]):
        raise ValueError(f"x outside [{s.knots[0]}, {s.knots[-1]}]")
    i = np.clip(np.searchsorted(s.knots, x, side="right") - 1, 0, s.knots.size - 2)
    x0 = s.knots[i]
    h = s.knots[i + 1] - x0
    t = (x - x0) / h
    y0, y1 = s.values[i], s.values[i + 1]
    d0, d1 = s.slopes[i] * h, s.slopes[i + 1] * h
    if nu == 0:
        t2 = t * t
        t3 = t2 * t
        # written around y0 so that flat segments (y0 == y1, zero slopes) are exact
        out = y0 + (y1 - y0) * (3 * t2 - 2 * t3) + (t3 - 2 * t2 + t) * d0 + (t3 - t2) * d1
        out = np.where(t == 1.0, y1, out)
    elif nu == 1:
        t2 = t * t
        out = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * d0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * d1) / h
    else:
        raise ValueError("nu must be 0 or 1")
    return out if out.ndim else float(out)
