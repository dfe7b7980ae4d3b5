"""Arousal-aware minimum-time path planning over Bernstein control points.

The running cost is time plus a squared-hinge penalty on predicted arousal
above a threshold; the total cost integrates it by Lobatto quadrature. Speed
and acceleration limits are imposed on derivative-curve control points and
collision avoidance on subdivision hulls - both conservative by the convex
hull property - and the finite-dimensional program over interior control
points and final time is solved by an exterior penalty method with restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .bernstein import (
    BernsteinCurve,
    LglRule,
    bernstein_matrix,
    bernstein_to_interpolation,
    derivative_curve,
    lgl_quadrature,
    lgl_rule,
    sample_curve,
    subdivision_matrices,
)
from .model import ArousalModel, FeatureVector, kinematic_features

SUBDIVISION_DEPTH = 4
# Constraints are tightened by this relative amount inside the solver so the
# reported solution is strictly feasible against the true bounds.
_TIGHTEN = 1e-3


class PlanInfeasibleError(RuntimeError):
    """No feasible path found; carries the best infeasible candidate."""

    def __init__(self, message: str, best_candidate=None, report=None):
        super().__init__(message)
        self.best_candidate = best_candidate
        self.report = report


@dataclass
class Circle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.center.shape != (2,):
            raise ValueError("obstacle center must be planar")
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")


@dataclass
class PlanningScenario:
    """Geometry, kinematic bounds, and cost tuning of one planning problem."""

    human_position: np.ndarray
    start: np.ndarray
    goal: np.ndarray
    v_max: float
    a_max: float
    gamma: float = 0.0
    b_a: float = 0.0
    obstacles: list[Circle] = field(default_factory=list)
    flight_altitude: float = 1.6
    degree: int = 8
    t_min: float = 0.5
    t_max: float = 120.0
    safety_margin: float = 0.2

    def __post_init__(self):
        self.human_position = np.asarray(self.human_position, dtype=float)
        self.start = np.asarray(self.start, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)
        if self.human_position.shape != (3,):
            raise ValueError("human position must be a 3D point")
        if self.start.shape != (2,) or self.goal.shape != (2,):
            raise ValueError("start and goal must be planar points")
        if np.allclose(self.start, self.goal):
            raise ValueError("start and goal must differ")
        if not (self.v_max > 0 and self.a_max > 0):
            raise ValueError("kinematic bounds must be positive")
        if not self.t_min > 0:
            raise ValueError("t_min must be positive")
        if self.t_max < self.t_min:
            raise ValueError("t_max must be at least t_min")
        if self.gamma < 0 or self.b_a < 0:
            raise ValueError("gamma and b_a must be nonnegative")
        if self.degree < 2:
            raise ValueError("curve degree must be at least 2")
        if self.safety_margin < 0:
            raise ValueError("safety margin must be nonnegative")


@dataclass
class ConstraintReport:
    """Max violation per constraint family; feasible when all are <= 0."""

    collision: float
    velocity: float
    acceleration: float

    def max_violation(self) -> float:
        return max(self.collision, self.velocity, self.acceleration)

    def feasible(self, tol: float = 0.0) -> bool:
        return self.max_violation() <= tol


@dataclass
class SolverDiagnostics:
    iterations: int
    restarts: int
    converged: bool
    feasible_starts: int


@dataclass
class PlanResult:
    curve: BernsteinCurve
    cost: float
    report: ConstraintReport
    min_human_distance: float
    diagnostics: SolverDiagnostics


@dataclass
class PlannerConfig:
    restarts: int = 8
    penalty_stages: int = 4
    penalty_weight0: float = 10.0
    penalty_growth: float = 10.0
    maxiter_per_stage: int = 80
    dense_samples: int = 1000


def build_features(point, velocity, scenario: PlanningScenario) -> FeatureVector:
    """Kinematic feature vector of a planar path point at the flight altitude.

    The range rate is the radial velocity component; at zero range it falls
    back to the speed magnitude.
    """
    p = np.asarray(point, dtype=float)
    v = np.asarray(velocity, dtype=float)
    pos = np.array([p[0], p[1], scenario.flight_altitude])
    vel = np.array([v[0], v[1], 0.0])
    rel = pos - scenario.human_position
    d = float(np.linalg.norm(rel))
    if d > 0.0:
        d_dot = float(rel @ vel) / d
    else:
        d_dot = float(np.linalg.norm(vel))
    return FeatureVector(d, d_dot, *pos, *vel)


def running_cost(model: ArousalModel, x: FeatureVector, gamma: float,
                 b_a: float) -> float:
    """Instantaneous cost 1 + gamma * max(0, f(x) - b_a)^2; always >= 1."""
    if gamma < 0 or b_a < 0:
        raise ValueError("gamma and b_a must be nonnegative")
    excess = max(0.0, model.predict_one(x) - b_a)
    return 1.0 + gamma * excess * excess


def _features_at_nodes(curve: BernsteinCurve, scenario: PlanningScenario,
                       rule: LglRule) -> np.ndarray:
    zetas = 0.5 * (rule.nodes + 1.0)
    positions = bernstein_to_interpolation(curve, rule)
    d_ctrl = derivative_curve(curve).control_points
    velocities = bernstein_matrix(curve.degree - 1, zetas) @ d_ctrl
    n = len(positions)
    pos3 = np.column_stack([positions, np.full(n, scenario.flight_altitude)])
    vel3 = np.column_stack([velocities, np.zeros(n)])
    return kinematic_features(pos3, vel3, scenario.human_position)


def total_cost(curve: BernsteinCurve, scenario: PlanningScenario,
               model: ArousalModel) -> float:
    """J = t_f + gamma * integral of the squared arousal excess, by Lobatto
    quadrature at the curve's own order."""
    rule = lgl_rule(curve.degree)
    features = _features_at_nodes(curve, scenario, rule)
    excess = np.maximum(0.0, model.predict(features) - scenario.b_a)
    return curve.t_f + scenario.gamma * lgl_quadrature(excess**2, rule, curve.t_f)


@njit(cache=True, nogil=True)
def _collision_kernel(segments, centers, radii, margin, out):  # pragma: no cover
    """Violation margin - (dist(center, hull of segment points) - radius) for
    every (subdivision segment, obstacle) pair. Hulls are built in place by
    the monotone chain; distance is zero inside a proper hull."""
    n_seg, m, _ = segments.shape
    order = np.empty(m, np.int64)
    chain = np.empty(2 * m + 1, np.int64)
    for s in range(n_seg):
        pts = segments[s]
        for i in range(m):
            order[i] = i
        for i in range(1, m):  # insertion sort by (x, y)
            j = i
            while j > 0:
                a = order[j - 1]
                b = order[j]
                if pts[b, 0] < pts[a, 0] or (pts[b, 0] == pts[a, 0]
                                             and pts[b, 1] < pts[a, 1]):
                    order[j - 1] = b
                    order[j] = a
                    j -= 1
                else:
                    break
        k = 0
        for ii in range(m):  # lower chain
            p = order[ii]
            while k >= 2:
                o = chain[k - 2]
                a = chain[k - 1]
                cr = ((pts[a, 0] - pts[o, 0]) * (pts[p, 1] - pts[o, 1])
                      - (pts[a, 1] - pts[o, 1]) * (pts[p, 0] - pts[o, 0]))
                if cr <= 0.0:
                    k -= 1
                else:
                    break
            chain[k] = p
            k += 1
        lower = k + 1
        for ii in range(m - 2, -1, -1):  # upper chain
            p = order[ii]
            while k >= lower:
                o = chain[k - 2]
                a = chain[k - 1]
                cr = ((pts[a, 0] - pts[o, 0]) * (pts[p, 1] - pts[o, 1])
                      - (pts[a, 1] - pts[o, 1]) * (pts[p, 0] - pts[o, 0]))
                if cr <= 0.0:
                    k -= 1
                else:
                    break
            chain[k] = p
            k += 1
        h = k - 1  # chain closes on its first vertex

        for o_idx in range(centers.shape[0]):
            cx = centers[o_idx, 0]
            cy = centers[o_idx, 1]
            if h == 1:
                v = chain[0]
                dist = np.sqrt((cx - pts[v, 0]) ** 2 + (cy - pts[v, 1]) ** 2)
            else:
                inside = h >= 3
                best = 1e300
                for e in range(h):
                    a = chain[e]
                    b = chain[(e + 1) % h]
                    ax, ay = pts[a, 0], pts[a, 1]
                    bx, by = pts[b, 0], pts[b, 1]
                    cr = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
                    if cr < 0.0:
                        inside = False
                    abx = bx - ax
                    aby = by - ay
                    denom = abx * abx + aby * aby
                    if denom == 0.0:
                        u = 0.0
                    else:
                        u = ((cx - ax) * abx + (cy - ay) * aby) / denom
                        if u < 0.0:
                            u = 0.0
                        elif u > 1.0:
                            u = 1.0
                    dx = cx - (ax + u * abx)
                    dy = cy - (ay + u * aby)
                    d2 = dx * dx + dy * dy
                    if d2 < best:
                        best = d2
                dist = 0.0 if inside else np.sqrt(best)
            out[s, o_idx] = margin - (dist - radii[o_idx])


@lru_cache(maxsize=None)
def _stacked_subdivision(degree: int, depth: int) -> np.ndarray:
    return np.vstack(subdivision_matrices(degree, depth))


@lru_cache(maxsize=None)
def _no_obstacles() -> tuple[np.ndarray, np.ndarray]:
    return np.empty((0, 2)), np.empty(0)


def _constraint_terms(curve: BernsteinCurve, scenario: PlanningScenario,
                      tighten: float = 0.0,
                      obstacle_arrays: tuple[np.ndarray, np.ndarray] | None = None,
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw violation values per constraint instance (positive = violated)."""
    margin = scenario.safety_margin + tighten * max(scenario.safety_margin, 1.0)
    if obstacle_arrays is None:
        if scenario.obstacles:
            obstacle_arrays = (
                np.stack([o.center for o in scenario.obstacles]),
                np.array([o.radius for o in scenario.obstacles]),
            )
        else:
            obstacle_arrays = _no_obstacles()
    centers, radii = obstacle_arrays
    if len(radii):
        m = curve.degree + 1
        segments = (_stacked_subdivision(curve.degree, SUBDIVISION_DEPTH)
                    @ curve.control_points).reshape(-1, m, 2)
        collision = np.empty((segments.shape[0], len(radii)))
        _collision_kernel(segments, centers, radii, margin, collision)
        collision = collision.ravel()
    else:
        collision = np.array([-np.inf])
    vel = derivative_curve(curve)
    v_limit = scenario.v_max * (1.0 - tighten)
    speed = np.linalg.norm(vel.control_points, axis=1) - v_limit
    acc = derivative_curve(vel)
    a_limit = scenario.a_max * (1.0 - tighten)
    accel = np.linalg.norm(acc.control_points, axis=1) - a_limit
    return collision, speed, accel


def constraint_eval(curve: BernsteinCurve, scenario: PlanningScenario) -> ConstraintReport:
    """Conservative constraint check via subdivision hulls and control-point norms.

    Collision clears every depth-4 subdivision hull against every obstacle by
    the safety margin; speed and acceleration bound the derivative curves'
    control-point norms, which bound the true derivatives everywhere.
    """
    collision, speed, accel = _constraint_terms(curve, scenario)
    return ConstraintReport(
        collision=float(np.max(collision)),
        velocity=float(np.max(speed)),
        acceleration=float(np.max(accel)),
    )


def min_human_distance(curve: BernsteinCurve, scenario: PlanningScenario,
                       n_samples: int = 1000) -> float:
    """Closest 3D approach to the human over a dense time grid."""
    times = np.linspace(0.0, curve.t_f, n_samples + 1)
    planar = sample_curve(curve, times)
    positions = np.column_stack(
        [planar, np.full(len(planar), scenario.flight_altitude)])
    return float(np.min(np.linalg.norm(positions - scenario.human_position, axis=1)))


def straight_line_curve(scenario: PlanningScenario, t_f: float) -> BernsteinCurve:
    """Uniformly spaced control points from start to goal: the seed family."""
    alphas = np.linspace(0.0, 1.0, scenario.degree + 1)[:, None]
    ctrl = (1.0 - alphas) * scenario.start + alphas * scenario.goal
    return BernsteinCurve(ctrl, t_f)


def seed_family_min_time(scenario: PlanningScenario) -> float:
    """Minimum feasible duration of the straight uniform seed (zero acceleration,
    constant speed D / t_f), clipped below by t_min."""
    dist = float(np.linalg.norm(scenario.goal - scenario.start))
    return max(scenario.t_min, dist / scenario.v_max)


def _pack(interior: np.ndarray, t_f: float) -> np.ndarray:
    return np.concatenate([interior.ravel(), [t_f]])


def _unpack(x: np.ndarray, scenario: PlanningScenario) -> BernsteinCurve:
    n_interior = scenario.degree - 1
    interior = x[: 2 * n_interior].reshape(n_interior, 2)
    t_f = float(np.clip(x[-1], scenario.t_min, scenario.t_max))
    ctrl = np.vstack([scenario.start, interior, scenario.goal])
    return BernsteinCurve(ctrl, t_f)


def plan(scenario: PlanningScenario, model: ArousalModel, seed: int = 0,
         config: PlannerConfig | None = None, threads: int = 1,
         extra_starts: list[BernsteinCurve] | None = None) -> PlanResult:
    """Solve for the lowest-cost feasible curve between the scenario endpoints.

    Multi-start exterior penalty: each start runs a geometric schedule of
    penalty weights, with an L-BFGS-B inner solve on the interior control
    points and the final time (endpoints stay pinned). Deterministic for a
    fixed seed. Raises PlanInfeasibleError when no start reaches feasibility.
    """
    cfg = config or PlannerConfig()
    t_kin = seed_family_min_time(scenario)
    if t_kin > scenario.t_max:
        raise PlanInfeasibleError(
            f"straight-line seed needs t_f >= {t_kin:.3f}s, above t_max = "
            f"{scenario.t_max}s; no kinematically feasible seed exists")

    rng = np.random.default_rng(seed)
    dist = float(np.linalg.norm(scenario.goal - scenario.start))
    base = straight_line_curve(scenario, 1.0)
    interior0 = base.control_points[1:-1]

    starts: list[np.ndarray] = []
    t_hi = min(scenario.t_max, 3.0 * t_kin)
    for i in range(cfg.restarts):
        t0 = min(1.05 * t_kin, scenario.t_max) if i == 0 else rng.uniform(
            min(1.02 * t_kin, t_hi), t_hi)
        jitter = 0.0 if i == 0 else rng.normal(0.0, 0.12 * dist,
                                               size=interior0.shape)
        starts.append(_pack(interior0 + jitter, t0))
    for curve in extra_starts or []:
        if curve.degree == scenario.degree:
            t0 = float(np.clip(curve.t_f, scenario.t_min, scenario.t_max))
            starts.append(_pack(curve.control_points[1:-1], t0))

    n_interior = scenario.degree - 1
    bounds = [(None, None)] * (2 * n_interior) + [(scenario.t_min, scenario.t_max)]
    if scenario.obstacles:
        obstacle_arrays = (np.stack([o.center for o in scenario.obstacles]),
                           np.array([o.radius for o in scenario.obstacles]))
    else:
        obstacle_arrays = _no_obstacles()

    def penalized(x: np.ndarray, weight: float) -> float:
        curve = _unpack(x, scenario)
        cost = total_cost(curve, scenario, model)
        collision, speed, accel = _constraint_terms(
            curve, scenario, tighten=_TIGHTEN, obstacle_arrays=obstacle_arrays)
        pen = 0.0
        for terms in (collision, speed, accel):
            viol = np.maximum(0.0, terms)
            pen += float(np.sum(viol**2))
        return cost + weight * pen

    def solve_one(x0: np.ndarray) -> tuple[np.ndarray, int]:
        x = x0.copy()
        iters = 0
        weight = cfg.penalty_weight0
        for _ in range(cfg.penalty_stages):
            res = minimize(penalized, x, args=(weight,), method="L-BFGS-B",
                           bounds=bounds,
                           options={"maxiter": cfg.maxiter_per_stage})
            x = res.x
            iters += int(res.nit)
            weight *= cfg.penalty_growth
        return x, iters

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            solved = list(pool.map(solve_one, starts))
    else:
        solved = [solve_one(x0) for x0 in starts]

    total_iters = 0
    best_feasible: tuple[float, BernsteinCurve, ConstraintReport] | None = None
    best_infeasible: tuple[float, float, BernsteinCurve, ConstraintReport] | None = None
    feasible_starts = 0
    for x, iters in solved:
        total_iters += iters
        curve = _unpack(x, scenario)
        report = constraint_eval(curve, scenario)
        cost = total_cost(curve, scenario, model)
        if report.feasible():
            feasible_starts += 1
            if best_feasible is None or cost < best_feasible[0]:
                best_feasible = (cost, curve, report)
        else:
            key = (report.max_violation(), cost)
            if best_infeasible is None or key < best_infeasible[:2]:
                best_infeasible = (*key, curve, report)

    diagnostics = SolverDiagnostics(
        iterations=total_iters, restarts=len(starts),
        converged=best_feasible is not None, feasible_starts=feasible_starts)
    if best_feasible is None:
        assert best_infeasible is not None
        _, cost, curve, report = best_infeasible
        raise PlanInfeasibleError(
            "no feasible path found after all restarts; best candidate violates "
            f"constraints by {report.max_violation():.4g}",
            best_candidate=PlanResult(curve, cost, report,
                                      min_human_distance(curve, scenario),
                                      diagnostics),
            report=report)
    cost, curve, report = best_feasible
    return PlanResult(
        curve=curve, cost=cost, report=report,
        min_human_distance=min_human_distance(curve, scenario,
                                              cfg.dense_samples),
        diagnostics=diagnostics)


def sweep_ba(scenario: PlanningScenario, model: ArousalModel,
             b_a_values: list[float], seed: int = 0,
             config: PlannerConfig | None = None,
             threads: int = 1) -> list[tuple[float, PlanResult]]:
    """Plan across arousal thresholds with continuation between solves.

    Each threshold reuses the previous optimum as an extra start, which keeps
    the family of solutions on one branch; lower thresholds penalize arousal
    at greater range and push the path farther from the human.
    """
    results = []
    warm: list[BernsteinCurve] = []
    for b_a in b_a_values:
        scen = replace(scenario, b_a=float(b_a))
        result = plan(scen, model, seed=seed, config=config, threads=threads,
                      extra_starts=warm)
        warm = [result.curve]
        results.append((float(b_a), result))
    return results
