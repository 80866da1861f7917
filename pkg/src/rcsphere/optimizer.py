"""Minimise SEV at the origin over the knot values of a Hermite radius.

The decision variables are the knot values ``v_1..v_{q-1}`` (``v_q = d``),
scaled by ``d``. Constraints: coverage on a gamma grid, monotone knot values,
and bounds ``[value_floor, d]``. The problem is solved with SLSQP from several
starting points using forward-difference gradients, and the winner is checked
on a fine gamma sweep. Sweep dips below the level are added to the grid and
the solve is repeated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .performance import TAIL_WIDTH, coverage_probability, curve, sev
from .quadrature import DEFAULT_CONFIG, QuadratureConfig
from .sphere import DEFAULT_K, RadiusFunction, ch_radius, default_knots, hermite_radius, standard_radius

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(float(g) for g in range(66))


class InfeasibleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizationProblem:
    p: int
    alpha: float = 0.05
    k: float = DEFAULT_K
    knots: tuple[float, ...] | None = None
    gamma_grid: tuple[float, ...] = DEFAULT_GRID
    value_floor: float | None = None  # default 1e-3 * d
    coverage_slack: float = 1e-6
    quadrature: QuadratureConfig = DEFAULT_CONFIG
    fd_step: float = 1e-5  # relative to d
    max_iter: int = 100
    max_rounds: int = 3
    sweep_step: float = 0.05
    sweep_max: float = 70.0
    sweep_tol: float = 1e-4
    starts: tuple[str, ...] = ("casella_hwang", "all_d", "ramp")

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 3 or self.p % 2 == 0:
            raise ValueError("p must be an odd integer >= 3")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.coverage_slack < 0:
            raise ValueError("coverage_slack must be nonnegative")
        if self.value_floor is not None and not 0 < self.value_floor < self.d:
            raise ValueError("value_floor must lie in (0, d)")
        if self.fd_step <= 0 or self.max_iter < 1 or self.sweep_step <= 0:
            raise ValueError("fd_step, max_iter and sweep_step must be positive")
        grid = np.asarray(self.gamma_grid, dtype=float)
        if grid.size and (np.any(grid < 0) or np.any(np.diff(grid) < 0)):
            raise ValueError("gamma_grid must be sorted and nonnegative")
        knots = self.resolved_knots()
        if knots[0] != 0 or knots[-1] != self.k or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must increase strictly from 0 to k")

    @property
    def d(self) -> float:
        return standard_radius(self.p, self.alpha)

    @property
    def floor(self) -> float:
        return 1e-3 * self.d if self.value_floor is None else self.value_floor

    def resolved_knots(self) -> np.ndarray:
        if self.knots is None:
            return default_knots(self.p, self.d, self.k)
        return np.asarray(self.knots, dtype=float)


@dataclass
class OptimizationResult:
    radius: RadiusFunction
    sev_at_zero: float
    min_coverage_on_grid: float
    global_min_coverage: float
    argmin_gamma: float
    iterations: int
    converged: bool
    gamma_grid: tuple[float, ...] = ()
    objective: float = float("nan")  # solver's own final SEV(0)
    history: list = field(default_factory=list)


class GlobalCoverage(NamedTuple):
    min_cp: float
    argmin_gamma: float
    asymptote_gap: float
    gammas: np.ndarray
    values: np.ndarray


def verify_global_coverage(
    radius: RadiusFunction,
    alpha: float,
    fine_step: float = 0.05,
    gamma_max: float = 70.0,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> GlobalCoverage:
    """Coverage on ``{0, fine_step, ..., gamma_max}``: minimum, its location and the gap at ``gamma_max``."""
    if fine_step <= 0:
        raise ValueError("fine_step must be positive")
    n = int(math.floor(gamma_max / fine_step + 1e-9))
    gammas = fine_step * np.arange(n + 1)
    values = curve(radius, gammas, "coverage", cfg).value
    i = int(np.argmin(values))
    gap = abs(values[-1] - (1 - alpha)) if gammas[-1] == gamma_max else abs(
        coverage_probability(radius, gamma_max, cfg) - (1 - alpha)
    )
    return GlobalCoverage(float(values[i]), float(gammas[i]), float(gap), gammas, values)


class _Model:
    """Caches SEV(0) and grid coverage for a vector of scaled knot values."""

    def __init__(self, problem: OptimizationProblem, grid: np.ndarray):
        self.pr = problem
        self.d = problem.d
        self.knots = problem.resolved_knots()
        self.level = 1 - problem.alpha - problem.coverage_slack
        self.cfg = problem.quadrature
        root_p = math.sqrt(problem.p)
        # coverage at gamma only sees b on [gamma - TAIL_WIDTH, gamma + ...]/sqrt(p);
        # once that lies past k the constraint does not depend on the knots
        free = grid - TAIL_WIDTH < problem.k * root_p
        self.grid = grid[free]
        self.fixed_grid = grid[~free]
        self.reach = np.array([g + max(TAIL_WIDTH, math.sqrt(2.0 * problem.p)) for g in self.grid]) / root_p
        self.low = np.maximum(self.grid - TAIL_WIDTH, 0.0) / root_p
        self._cache: dict[bytes, tuple[float, np.ndarray]] = {}
        self.evaluations = 0

    def radius(self, u, validate=False) -> RadiusFunction:
        v = np.append(np.asarray(u, dtype=float) * self.d, self.d)
        return hermite_radius(self.pr.p, self.pr.alpha, self.knots, v, self.pr.k, self.d, validate=validate)

    def _eval(self, u, which=None):
        key = np.asarray(u, dtype=float).tobytes()
        if which is None and key in self._cache:
            return self._cache[key]
        r = self.radius(u)
        self.evaluations += 1
        s = sev(r, 0.0, self.cfg)
        idx = range(self.grid.size) if which is None else which
        cp = np.full(self.grid.size, np.nan)
        for i in idx:
            cp[i] = coverage_probability(r, float(self.grid[i]), self.cfg)
        if which is None:
            self._cache[key] = (s, cp)
        return s, cp

    def objective(self, u):
        return math.log(self._eval(u)[0])

    def constraints(self, u):
        return 1e3 * (self._eval(u)[1] - self.level)

    def jacobians(self, u):
        key = ("jac", np.asarray(u, dtype=float).tobytes())
        if key in self._cache:
            return self._cache[key]
        u = np.asarray(u, dtype=float)
        s0, c0 = self._eval(u)
        h = self.pr.fd_step
        n = u.size
        gobj = np.zeros(n)
        gcon = np.zeros((self.grid.size, n))
        for i in range(n):
            step = h if u[i] + h <= 1.0 else -h
            uu = u.copy()
            uu[i] += step
            # v_i moves b only between knots i-2 and i+2 (slopes are local)
            lo = self.knots[max(i - 2, 0)]
            hi = self.knots[min(i + 2, self.knots.size - 1)]
            hit = [j for j in range(self.grid.size) if self.low[j] < hi and self.reach[j] > lo]
            s1, c1 = self._eval(uu, hit)
            gobj[i] = (math.log(s1) - math.log(s0)) / step
            for j in hit:
                gcon[j, i] = 1e3 * (c1[j] - c0[j]) / step
        self._cache[key] = (gobj, gcon)
        return gobj, gcon


def _starts(problem: OptimizationProblem, knots: np.ndarray) -> dict[str, np.ndarray]:
    d, lo = problem.d, problem.floor / problem.d
    out = {}
    for name in problem.starts:
        if name == "casella_hwang":
            v = np.clip(np.asarray(ch_radius(knots, problem.p, d)) / d, lo, 1.0)
            v = np.maximum.accumulate(v)
        elif name == "all_d":
            v = np.ones(knots.size)
        elif name == "ramp":
            v = 0.5 * (1.0 + knots / knots[-1])
        else:
            raise ValueError(f"unknown start {name!r}")
        out[name] = v[:-1]
    return out


def _polish(model: _Model, u: np.ndarray, lo: float) -> np.ndarray:
    # SEV is nondecreasing in every knot value, so pushing a value down to its
    # lower limit is an improvement whenever coverage survives; this settles
    # knots whose influence on the objective is too small for the solver to see
    u = u.copy()
    s, _ = model._eval(u)
    for i in range(u.size):
        target = max(lo, u[i - 1]) if i else lo
        if u[i] <= target:
            continue
        trial = u.copy()
        trial[i] = target
        s_new, cp = model._eval(trial)
        if s_new <= s and (not cp.size or np.all(cp >= model.level)):
            u, s = trial, s_new
    return u


def _solve_on_grid(problem: OptimizationProblem, grid: np.ndarray):
    model = _Model(problem, grid)
    if model.fixed_grid.size:
        ref = hermite_radius(problem.p, problem.alpha, model.knots, np.full(model.knots.size, problem.d))
        fixed = np.array([coverage_probability(ref, float(g), problem.quadrature) for g in model.fixed_grid])
        if np.any(fixed < model.level):
            bad = model.fixed_grid[fixed < model.level]
            raise InfeasibleError(f"coverage below the level at gamma={bad.tolist()} whatever the knot values")
    n = model.knots.size - 1
    lo = problem.floor / problem.d
    bounds = [(lo, 1.0)] * n
    # monotone knots: u_{i+1} - u_i >= 0 (u_n = 1 is handled by the bounds)
    mono = np.zeros((n - 1, n))
    for i in range(n - 1):
        mono[i, i], mono[i, i + 1] = -1.0, 1.0
    cons = [{"type": "ineq", "fun": lambda u: mono @ u, "jac": lambda u: mono}]
    if model.grid.size:
        cons.append({"type": "ineq", "fun": model.constraints, "jac": lambda u: model.jacobians(u)[1]})

    runs = []
    for name, u0 in _starts(problem, model.knots).items():
        res = minimize(
            model.objective,
            u0,
            jac=lambda u: model.jacobians(u)[0],
            bounds=bounds,
            constraints=cons,
            method="SLSQP",
            options={"maxiter": problem.max_iter, "ftol": 1e-10},
        )
        u = np.maximum.accumulate(np.clip(res.x, lo, 1.0))
        s, cp = model._eval(u)
        feasible = bool(np.all(cp >= model.level - 1e-9)) if cp.size else True
        log.info("start %s: sev0=%.6g feasible=%s nit=%d (%s)", name, s, feasible, res.nit, res.message)
        runs.append((not feasible, s, name, u, res))
    runs.sort(key=lambda t: (t[0], t[1]))
    infeasible, s, name, u, res = runs[0]
    if infeasible:
        raise InfeasibleError("no start reached a point satisfying the coverage constraints")
    u = _polish(model, u, lo)
    s, cp = model._eval(u)
    min_grid = float(np.min(cp)) if cp.size else float("nan")
    if model.fixed_grid.size:
        min_grid = min(min_grid, float(fixed.min())) if cp.size else float(fixed.min())
    return model, u, s, min_grid, res, [(r[2], r[1], not r[0], r[4].nit) for r in runs]


def solve(problem: OptimizationProblem) -> OptimizationResult:
    """Optimise the knot values, then verify coverage on a fine gamma sweep."""
    grid = np.asarray(problem.gamma_grid, dtype=float)
    history = []
    for round_ in range(max(problem.max_rounds, 1)):
        model, u, s, min_grid, res, runs = _solve_on_grid(problem, grid)
        radius = model.radius(u, validate=True)
        sweep = verify_global_coverage(radius, problem.alpha, problem.sweep_step, problem.sweep_max, problem.quadrature)
        history.append({"round": round_, "grid_size": int(grid.size), "runs": runs, "sweep_min": sweep.min_cp})
        target = 1 - problem.alpha - problem.sweep_tol
        if sweep.min_cp >= target or not grid.size:
            break
        v = sweep.values
        dips = [
            float(sweep.gammas[i])
            for i in range(v.size)
            if v[i] < target and (i == 0 or v[i] <= v[i - 1]) and (i == v.size - 1 or v[i] <= v[i + 1])
        ]
        log.info("sweep dips below %.6f at %s; refining grid", target, dips)
        grid = np.unique(np.concatenate([grid, dips]))
    return OptimizationResult(
        radius=radius,
        sev_at_zero=sev(radius, 0.0, problem.quadrature),
        min_coverage_on_grid=min_grid,
        global_min_coverage=sweep.min_cp,
        argmin_gamma=sweep.argmin_gamma,
        iterations=int(res.nit),
        converged=bool(res.success),
        gamma_grid=tuple(float(g) for g in grid),
        objective=s,
        history=history,
    )
