"""Bernstein-polynomial curve machinery and Legendre-Gauss-Lobatto quadrature.

Planar curves are held as control points plus a duration. The convex hull of
the control points contains the whole curve, and De Casteljau subdivision
yields piecewise hulls that tighten around it; both facts drive the planner's
collision checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass
class BernsteinCurve:
    """Planar degree-n Bernstein curve: n+1 control points and duration t_f.

    Degree-0 (single-point) curves are permitted so that derivatives of lines
    stay representable; the planner always works at degree >= 2.
    """

    control_points: np.ndarray
    t_f: float

    def __post_init__(self):
        self.control_points = np.asarray(self.control_points, dtype=float)
        if self.control_points.ndim != 2 or self.control_points.shape[1] != 2:
            raise ValueError("control points must have shape (n+1, 2)")
        if self.control_points.shape[0] < 1:
            raise ValueError("curve needs at least one control point")
        if not np.all(np.isfinite(self.control_points)):
            raise ValueError("control points must be finite")
        if not self.t_f > 0.0:
            raise ValueError(f"duration must be positive, got {self.t_f}")

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1


@dataclass
class LglRule:
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1] for order n."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.nodes.shape != self.weights.shape or self.nodes.ndim != 1:
            raise ValueError("nodes and weights must be equal-length vectors")

    @property
    def order(self) -> int:
        return len(self.nodes) - 1


@dataclass
class ConvexHull:
    """Counterclockwise convex polygon; degenerate hulls are points/segments."""

    vertices: np.ndarray
    degenerate: bool

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)


def _decasteljau(points: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Evaluate at normalized parameters zeta (m,); points (n+1, 2) -> (m, 2)."""
    zeta = zeta[:, None, None]
    layer = np.broadcast_to(points, (zeta.shape[0],) + points.shape).copy()
    while layer.shape[1] > 1:
        layer = (1.0 - zeta) * layer[:, :-1, :] + zeta * layer[:, 1:, :]
    return layer[:, 0, :]


def bernstein_eval(curve: BernsteinCurve, t: float) -> np.ndarray:
    """Point on the curve at time t in [0, t_f], via the De Casteljau recurrence."""
    if not 0.0 <= t <= curve.t_f:
        raise ValueError(f"t = {t} outside [0, {curve.t_f}]")
    return _decasteljau(curve.control_points, np.array([t / curve.t_f]))[0]


def sample_curve(curve: BernsteinCurve, times: np.ndarray) -> np.ndarray:
    """Vectorized evaluation at an array of times; shape (m, 2)."""
    times = np.asarray(times, dtype=float)
    if np.any((times < 0.0) | (times > curve.t_f)):
        raise ValueError("sample times outside [0, t_f]")
    return _decasteljau(curve.control_points, times / curve.t_f)


def derivative_curve(curve: BernsteinCurve) -> BernsteinCurve:
    """Hodograph: degree n-1 curve whose evaluation is d/dt of the original."""
    n = curve.degree
    if n < 1:
        raise ValueError("cannot differentiate a degree-0 curve")
    q = n * np.diff(curve.control_points, axis=0) / curve.t_f
    return BernsteinCurve(q, curve.t_f)


def de_casteljau_split(curve: BernsteinCurve, tau: float) -> tuple[BernsteinCurve, BernsteinCurve]:
    """Split at normalized time tau in (0, 1) into two same-degree pieces.

    The left piece covers [0, tau*t_f], the right piece [tau*t_f, t_f];
    evaluating the pieces on their own clocks reproduces the original curve.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau = {tau} outside (0, 1)")
    n = curve.degree
    left = np.empty((n + 1, 2))
    right = np.empty((n + 1, 2))
    layer = curve.control_points.copy()
    left[0] = layer[0]
    right[n] = layer[-1]
    for r in range(1, n + 1):
        layer = (1.0 - tau) * layer[:-1] + tau * layer[1:]
        left[r] = layer[0]
        right[n - r] = layer[-1]
    return (BernsteinCurve(left, tau * curve.t_f),
            BernsteinCurve(right, (1.0 - tau) * curve.t_f))


@lru_cache(maxsize=None)
def subdivision_matrices(degree: int, depth: int) -> tuple[np.ndarray, ...]:
    """Linear maps taking control points to the 2**depth midpoint-split segments.

    Each matrix S satisfies: segment control points = S @ control points.
    """
    n = degree
    left = np.zeros((n + 1, n + 1))
    right = np.zeros((n + 1, n + 1))
    layer = np.eye(n + 1)
    left[0] = layer[0]
    right[n] = layer[-1]
    for r in range(1, n + 1):
        layer = 0.5 * (layer[:-1] + layer[1:])
        left[r] = layer[0]
        right[n - r] = layer[-1]
    mats = [np.eye(n + 1)]
    for _ in range(depth):
        mats = [m for s in mats for m in (left @ s, right @ s)]
    return tuple(mats)


def subdivide(curve: BernsteinCurve, depth: int) -> list[BernsteinCurve]:
    """Recursive midpoint splitting into 2**depth equal-time segments."""
    seg_tf = curve.t_f / 2**depth
    return [BernsteinCurve(s @ curve.control_points, seg_tf)
            for s in subdivision_matrices(curve.degree, depth)]


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: np.ndarray) -> ConvexHull:
    """Monotone-chain hull; collinear boundary points are dropped.

    Inputs with fewer than three distinct non-collinear points yield a
    degenerate point or segment hull.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError("need at least one planar point")
    unique = sorted({(float(p[0]), float(p[1])) for p in pts})
    if len(unique) == 1:
        return ConvexHull(np.array(unique), degenerate=True)

    def half(seq):
        chain: list[tuple[float, float]] = []
        for p in seq:
            while len(chain) > 1 and _cross(chain[-2], chain[-1], p) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(unique)
    upper = half(reversed(unique))
    verts = lower[:-1] + upper[:-1]
    if len(verts) < 3:
        # All points collinear: keep the extreme pair.
        return ConvexHull(np.array([unique[0], unique[-1]]), degenerate=True)
    return ConvexHull(np.array(verts), degenerate=False)


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    u = float((p - a) @ ab) / denom
    u = min(1.0, max(0.0, u))
    closest = a + u * ab
    return float(np.hypot(*(p - closest)))


def point_hull_distance(point, hull: ConvexHull) -> float:
    """Euclidean distance from a point to the hull; zero on or inside it."""
    p = np.asarray(point, dtype=float)
    v = hull.vertices
    if len(v) == 1:
        return float(np.hypot(*(p - v[0])))
    edges = [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))] if not hull.degenerate \
        else [(v[0], v[1])]
    if not hull.degenerate:
        if all(_cross(a, b, p) >= 0.0 for a, b in edges):
            return 0.0
    return min(_point_segment_distance(p, a, b) for a, b in edges)


def signed_containment(point, hull: ConvexHull) -> float:
    """Signed margin: positive inside a proper hull, negative outside by distance."""
    p = np.asarray(point, dtype=float)
    v = hull.vertices
    if hull.degenerate:
        return -point_hull_distance(p, hull)
    margins = []
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        edge_len = float(np.hypot(*(b - a)))
        margins.append(_cross(a, b, p) / edge_len)
    m = min(margins)
    if m >= 0.0:
        return m
    return -point_hull_distance(p, hull)


def hull_clearance(hull: ConvexHull, center, radius: float) -> float:
    """Signed clearance of a circular obstacle: distance(center, hull) - radius."""
    return point_hull_distance(center, hull) - radius


def _legendre_last_two(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Values of P_n and P_{n-1} at x by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p, p_prev


@lru_cache(maxsize=None)
def lgl_rule(n: int, tol: float = 1e-14, max_iter: int = 100) -> LglRule:
    """Legendre-Gauss-Lobatto rule of order n (n+1 nodes, endpoints included).

    Nodes are the roots of (1 - x^2) P_n'(x), found by Newton iteration from
    Chebyshev-Lobatto starting points; weights are 2 / (n (n+1) P_n(x)^2).
    Exact for polynomials up to degree 2n - 1. Cached; treat the returned
    rule as read-only.
    """
    if n < 1:
        raise ValueError("order must be at least 1")
    x = np.cos(np.pi * np.arange(n + 1) / n)[::-1].copy()
    for _ in range(max_iter):
        pn, pn1 = _legendre_last_two(x, n)
        # x*P_n - P_{n-1} is proportional to (1-x^2) P_n'; endpoints are fixed points.
        dx = (x * pn - pn1) / ((n + 1) * pn)
        x_new = x - dx
        x_new = np.clip(x_new, -1.0, 1.0)
        if np.max(np.abs(x_new - x)) <= tol:
            x = x_new
            break
        x = x_new
    else:
        raise RuntimeError(f"Lobatto node iteration failed to converge for n = {n}")
    # Enforce the exact symmetries of the rule.
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    if n % 2 == 0:
        x[n // 2] = 0.0
    pn, _ = _legendre_last_two(x, n)
    w = 2.0 / (n * (n + 1) * pn**2)
    w = 0.5 * (w + w[::-1])
    return LglRule(x, w)


def lgl_quadrature(values: np.ndarray, rule: LglRule, t_f: float) -> float:
    """Integral over [0, t_f] of a function sampled at the mapped Lobatto nodes."""
    values = np.asarray(values, dtype=float)
    if values.shape != rule.nodes.shape:
        raise ValueError(
            f"got {values.size} values for a rule with {rule.nodes.size} nodes")
    return float(0.5 * t_f * (rule.weights @ values))


def lobatto_times(rule: LglRule, t_f: float) -> np.ndarray:
    """Rule nodes mapped from [-1, 1] onto [0, t_f]."""
    return 0.5 * t_f * (rule.nodes + 1.0)


@lru_cache(maxsize=None)
def _bernstein_matrix_cached(n: int, zetas: tuple[float, ...]) -> np.ndarray:
    z = np.asarray(zetas)
    cols = [math.comb(n, j) * (1.0 - z) ** (n - j) * z**j for j in range(n + 1)]
    return np.column_stack(cols)


def bernstein_matrix(n: int, zetas: np.ndarray) -> np.ndarray:
    """Basis matrix B[k, j] = C(n, j) (1-zeta_k)^(n-j) zeta_k^j."""
    return _bernstein_matrix_cached(n, tuple(float(z) for z in np.asarray(zetas)))


def bernstein_to_interpolation(curve: BernsteinCurve, rule: LglRule) -> np.ndarray:
    """Curve values at the mapped Lobatto nodes, as an (n+1, 2) array.

    This is the change of parameterization from control points to
    interpolation points; it is the matrix product of the Bernstein basis
    evaluated at the node parameters with the control points.
    """
    if rule.order != curve.degree:
        raise ValueError(
            f"rule order {rule.order} does not match curve degree {curve.degree}")
    zetas = 0.5 * (rule.nodes + 1.0)
    return bernstein_matrix(curve.degree, zetas) @ curve.control_points


def interpolation_to_bernstein(points: np.ndarray, rule: LglRule, t_f: float) -> BernsteinCurve:
    """Inverse transform: recover control points from Lobatto-node samples."""
    points = np.asarray(points, dtype=float)
    n = rule.order
    if points.shape != (n + 1, 2):
        raise ValueError(f"expected {n + 1} planar interpolation points")
    zetas = 0.5 * (rule.nodes + 1.0)
    b = bernstein_matrix(n, zetas)
    try:
        ctrl = np.linalg.solve(b, points)
    except np.linalg.LinAlgError as exc:  # distinct nodes make this unreachable
        raise ValueError("interpolation transform is singular") from exc
    return BernsteinCurve(ctrl, t_f)
