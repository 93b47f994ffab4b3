import logging
from dataclasses import dataclass
from typing import Sequence

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog, minimize_scalar

from bicomb.custom_types import PExponent, Vector
from bicomb.lp_geometry import is_inf, lp_norm

logger = logging.getLogger(__name__)

CLARABEL_SETTINGS = {"tol_gap_abs": 1e-11, "tol_gap_rel": 1e-11, "tol_feas": 1e-11}
LINE_SEARCH_XATOL = 1e-13
POLISH_DROP = 1e-12
MAX_SWEEPS = 10_000
SATURATION_TOL = 1e-7
DEGENERATE_LENGTH = 1e-9
RATIO_RESOLUTION = 1e-11


@dataclass(frozen=True)
class CrossingProblem:
    """Segments v_i = M_i z + c_i of a gluing path, as affine functions of crossing parameters z."""

    matrices: tuple[Vector, ...]
    offsets: tuple[Vector, ...]
    lower: Vector
    upper: Vector

    @property
    def n_vars(self) -> int:
        return self.lower.size

    def segments(self, z: Vector) -> list[Vector]:
        return [m @ z + c for m, c in zip(self.matrices, self.offsets)]

    def objective(self, z: Vector, p: PExponent) -> float:
        return sum(lp_norm(v, p) for v in self.segments(z))

    def clip(self, z: Vector) -> Vector:
        return np.clip(z, self.lower, self.upper)

    def feasible_start(self) -> Vector:
        return self.clip(np.zeros(self.n_vars))

    def window(self, j: int, z: Vector, budget: float, p: PExponent) -> tuple[float, float]:
        """Interval of z_j outside which the objective must exceed budget."""
        column_norms = [lp_norm(m[:, j], p) for m in self.matrices]
        reach = 2.0 * budget / max(column_norms) + 1e-9
        return max(self.lower[j], z[j] - reach), min(self.upper[j], z[j] + reach)


@dataclass(frozen=True)
class CrossingSolution:
    z: Vector
    value: float


def _cvx_ord(p: PExponent) -> float | str:
    return "inf" if is_inf(p) else float(p)


def _box_constraints(z: cp.Variable, problem: CrossingProblem) -> list:
    constraints = []
    low = np.flatnonzero(np.isfinite(problem.lower))
    high = np.flatnonzero(np.isfinite(problem.upper))
    if low.size:
        constraints.append(z[low] >= problem.lower[low])
    if high.size:
        constraints.append(z[high] <= problem.upper[high])
    return constraints


def _solve_cvx(objective, constraints: list, z: cp.Variable) -> Vector | None:
    prob = cp.Problem(cp.Minimize(objective), constraints)
    try:
        prob.solve(solver=cp.CLARABEL, **CLARABEL_SETTINGS)
    except cp.error.SolverError as e:
        logger.warning(f"Conic solve failed: {e}")
        return None
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or z.value is None:
        logger.warning(f"Conic solve ended with status {prob.status}")
        return None
    return np.asarray(z.value, dtype=float)


def _segment_terms(problem: CrossingProblem, z: cp.Variable, p: PExponent) -> list:
    return [cp.norm(m @ z + c, _cvx_ord(p)) for m, c in zip(problem.matrices, problem.offsets)]


def conic_solve(problem: CrossingProblem, p: PExponent) -> Vector | None:
    z = cp.Variable(problem.n_vars)
    objective = sum(_segment_terms(problem, z, p))
    found = _solve_cvx(objective, _box_constraints(z, problem), z)
    return None if found is None else problem.clip(found)


def _line_search(problem: CrossingProblem, p: PExponent, z: Vector, j: int) -> tuple[Vector, float]:
    current = problem.objective(z, p)
    lo, hi = problem.window(j, z, current, p)

    def along(value: float) -> float:
        trial = z.copy()
        trial[j] = value
        return problem.objective(trial, p)

    best_value, best_x = current, z[j]
    candidates = [lo, hi]
    if hi > lo:
        result = minimize_scalar(
            along, bounds=(lo, hi), method="bounded", options={"xatol": LINE_SEARCH_XATOL}
        )
        candidates.append(float(result.x))
    for x in candidates:
        value = along(x)
        if value < best_value - 1e-15:
            best_value, best_x = value, x
    moved = z.copy()
    moved[j] = best_x
    return moved, best_value


def polish(problem: CrossingProblem, p: PExponent, z: Vector) -> CrossingSolution:
    """Cyclic coordinate descent with exact line searches, stopped when a sweep gains < 1e-12."""
    z = problem.clip(np.asarray(z, dtype=float))
    value = problem.objective(z, p)
    for _ in range(MAX_SWEEPS):
        before = value
        for j in range(problem.n_vars):
            z, value = _line_search(problem, p, z, j)
        if before - value < POLISH_DROP:
            break
    else:
        logger.warning(f"Coordinate descent hit {MAX_SWEEPS} sweeps at value {value:.12g}")
    return CrossingSolution(z, value)


def solve_crossing(problem: CrossingProblem, p: PExponent) -> CrossingSolution:
    """Minimizes the sum of segment norms over the crossing parameters."""
    if problem.n_vars == 0:
        z = np.zeros(0)
        return CrossingSolution(z, problem.objective(z, p))
    if problem.n_vars == 1:
        return polish(problem, p, problem.feasible_start())
    start = conic_solve(problem, p)
    if start is None:
        start = problem.feasible_start()
    return polish(problem, p, start)


def _ratio_rows(
    problem: CrossingProblem, z: Vector
) -> list[tuple[int, int]]:
    """(segment, coordinate) pairs left strictly below the segment's sup norm."""
    rows = []
    for i, (m, v) in enumerate(zip(problem.matrices, problem.segments(z))):
        top = float(np.max(np.abs(v)))
        if not np.any(m) or top <= DEGENERATE_LENGTH:
            continue
        for j, entry in enumerate(v):
            if abs(entry) < top - SATURATION_TOL * (1.0 + top):
                rows.append((i, j))
    return rows


class _RatioProgram:
    """Feasibility LPs over (z, m) for a cap rho on unsaturated coordinate ratios."""

    def __init__(self, problem: CrossingProblem, budget: float, rows: Sequence[tuple[int, int]]):
        self.problem = problem
        self.budget = budget
        self.rows = list(rows)
        n, k = problem.n_vars, len(problem.matrices)
        a_rows, b_rows = [np.concatenate([np.zeros(n), np.ones(k)])], [budget]
        for i, (m, c) in enumerate(zip(problem.matrices, problem.offsets)):
            for j in range(m.shape[0]):
                for sign in (1.0, -1.0):
                    row = np.zeros(n + k)
                    row[:n] = sign * m[j]
                    row[n + i] = -1.0
                    a_rows.append(row)
                    b_rows.append(-sign * c[j])
        self.base_a = np.array(a_rows)
        self.base_b = np.array(b_rows)
        self.bounds = [
            (None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
            for lo, hi in zip(problem.lower, problem.upper)
        ] + [(0.0, None)] * k

    def ratio_block(self, rho: float) -> tuple[Vector, Vector]:
        n = self.problem.n_vars
        a_rows, b_rows = [], []
        for i, j in self.rows:
            m, c = self.problem.matrices[i], self.problem.offsets[i]
            for sign in (1.0, -1.0):
                row = np.zeros(n + len(self.problem.matrices))
                row[:n] = sign * m[j]
                row[n + i] = -rho
                a_rows.append(row)
                b_rows.append(-sign * c[j])
        return np.array(a_rows), np.array(b_rows)

    def feasible(self, rho: float) -> Vector | None:
        extra_a, extra_b = self.ratio_block(rho)
        result = linprog(
            np.zeros(self.base_a.shape[1]),
            A_ub=np.vstack([self.base_a, extra_a]),
            b_ub=np.concatenate([self.base_b, extra_b]),
            bounds=self.bounds,
            method="highs",
        )
        return result.x if result.status == 0 else None


def _least_euclidean(
    problem: CrossingProblem, program: _RatioProgram, rho: float
) -> Vector | None:
    n, k = problem.n_vars, len(problem.matrices)
    z = cp.Variable(n)
    caps = cp.Variable(k, nonneg=True)
    constraints = _box_constraints(z, problem) + [cp.sum(caps) <= program.budget]
    for i, (m, c) in enumerate(zip(problem.matrices, problem.offsets)):
        constraints.append(cp.abs(m @ z + c) <= caps[i])
    for i, j in program.rows:
        m, c = problem.matrices[i], problem.offsets[i]
        constraints.append(cp.abs(m[j] @ z + c[j]) <= rho * caps[i])
    objective = sum(_segment_terms(problem, z, 2.0))
    found = _solve_cvx(objective, constraints, z)
    return None if found is None else problem.clip(found)


def _lexicographic_sup(problem: CrossingProblem) -> Vector:
    interior = conic_solve(problem, "inf")
    best = solve_crossing(problem, "inf")
    if interior is None:
        interior = best.z
    optimum = min(best.value, problem.objective(interior, "inf"))
    budget = optimum + 1e-9 * (1.0 + optimum)
    rows = _ratio_rows(problem, interior)
    if not rows:
        chosen = _least_euclidean(problem, _RatioProgram(problem, budget, []), 1.0)
        return interior if chosen is None else chosen
    program = _RatioProgram(problem, budget, rows)
    lo, hi = 0.0, 1.0
    witness = program.feasible(hi)
    while hi - lo > RATIO_RESOLUTION:
        mid = 0.5 * (lo + hi)
        found = program.feasible(mid)
        if found is None:
            lo = mid
        else:
            hi, witness = mid, found
    logger.debug(f"Sup tie-break settled at ratio {hi:.12g} over {len(rows)} coordinates")
    chosen = _least_euclidean(problem, program, min(1.0, hi + 1e-9))
    if chosen is not None:
        return chosen
    return interior if witness is None else problem.clip(witness[: problem.n_vars])


def _lexicographic_sum(problem: CrossingProblem) -> Vector:
    best = solve_crossing(problem, 1.0)
    budget = best.value + 1e-9 * (1.0 + best.value)
    z = cp.Variable(problem.n_vars)
    constraints = _box_constraints(z, problem) + [
        sum(_segment_terms(problem, z, 1.0)) <= budget
    ]
    found = _solve_cvx(sum(_segment_terms(problem, z, 2.0)), constraints, z)
    return best.z if found is None else problem.clip(found)


def solve_lexicographic(problem: CrossingProblem, p: PExponent) -> Vector:
    """Crossing parameters of the canonical minimizer among the l^p-optimal ones.

    For p = inf the largest unsaturated coordinate ratio is minimized first, then the
    Euclidean length; for p = 1 only the Euclidean length. Other p have unique minima.
    """
    if problem.n_vars == 0:
        return np.zeros(0)
    if is_inf(p):
        return _lexicographic_sup(problem)
    if float(p) == 1.0:
        return _lexicographic_sum(problem)
    return solve_crossing(problem, p).z
