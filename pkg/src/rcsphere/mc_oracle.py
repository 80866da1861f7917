"""Monte Carlo estimates of coverage and scaled expected volume.

Samples are drawn in fixed-size blocks, block ``i`` using the ``i``-th child
of ``SeedSequence(seed)``. The estimate therefore depends only on
``(samples, seed)`` and not on how blocks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .sphere import RadiusFunction, RcsSpec, contains, radius_eval

BLOCK = 1 << 16


@dataclass(frozen=True)
class McConfig:
    samples: int = 1_000_000
    seed: int = 20140101
    direction: tuple[float, ...] | None = None  # None: first coordinate axis

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


class McEstimate(NamedTuple):
    cp_hat: float
    cp_se: float
    sev_hat: float
    sev_se: float


def _theta(p, gamma, direction):
    if direction is None:
        u = np.zeros(p)
        u[0] = 1.0
    else:
        u = np.asarray(direction, dtype=float)
        if u.shape != (p,):
            raise ValueError(f"direction must have length {p}")
        u = u / np.linalg.norm(u)
    return gamma * u


def _block_sums(spec, theta, n, seq):
    rng = np.random.Generator(np.random.PCG64(seq))
    x = theta + rng.standard_normal((n, spec.p))
    hit = contains(spec, x, theta)
    t = np.linalg.norm(x, axis=1) / math.sqrt(spec.p)
    vol = (np.asarray(radius_eval(spec.radius, t)) / spec.d) ** spec.p
    return hit.sum(), vol.sum(), np.square(vol).sum()


def estimate(spec: RcsSpec | RadiusFunction, gamma: float, cfg: McConfig = McConfig()) -> McEstimate:
    """Simulated coverage and SEV with their standard errors at ``||theta|| = gamma``."""
    if not isinstance(spec, RcsSpec):
        spec = RcsSpec(spec)
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    theta = _theta(spec.p, gamma, cfg.direction)
    n_blocks = -(-cfg.samples // BLOCK)
    children = np.random.SeedSequence(cfg.seed).spawn(n_blocks)
    hits = 0
    s1 = s2 = 0.0
    for i, seq in enumerate(children):
        n = min(BLOCK, cfg.samples - i * BLOCK)
        h, a, b = _block_sums(spec, theta, n, seq)
        hits += int(h)
        s1 += float(a)
        s2 += float(b)
    n = cfg.samples
    cp = hits / n
    mean = s1 / n
    if n > 1:
        var = max(s2 - n * mean * mean, 0.0) / (n - 1)
        sev_se = math.sqrt(var / n)
        cp_se = math.sqrt(cp * (1 - cp) / n)
    else:
        sev_se = cp_se = 0.0
    # constant radius: every draw gives the same volume
    if spec.radius.kind == "constant":
        sev_se = 0.0
    return McEstimate(cp, cp_se, mean, sev_se)
