"""Reachable gradients, superdifferentials and their slices."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_TOL_ACTIVE, SemiconcaveFn, _check_in_domain, active_set

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-10
COLLINEAR_TOL = 1e-10


class GeometryError(RuntimeError):
    pass


@dataclass(frozen=True)
class GradientSet:
    """Finite set of reachable gradients, stored as an ``(n, 2)`` array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("gradient set must be nonempty")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex hull given by its extreme points in counterclockwise order.

    One vertex is a point, two a segment.
    """

    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 2))

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, y: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= y <= self.hi + tol


def dedup(points, tol: float = DEDUP_TOL) -> np.ndarray:
    out: list[np.ndarray] = []
    for p in np.asarray(points, dtype=float).reshape(-1, 2):
        if all(np.linalg.norm(p - q) > tol for q in out):
            out.append(p)
    return np.array(out)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segment_hull(pts: np.ndarray) -> np.ndarray:
    # farthest pair among collinear points, lexicographically ordered
    best = (0.0, 0, 0)
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            d = float(np.linalg.norm(pts[a] - pts[b]))
            if d > best[0]:
                best = (d, a, b)
    if best[0] <= DEDUP_TOL:
        return pts[:1]
    ends = sorted([tuple(pts[best[1]]), tuple(pts[best[2]])])
    return np.array(ends)


def _collinear(pts: np.ndarray) -> bool:
    if len(pts) < 3:
        return True
    ext = _segment_hull(pts)
    if len(ext) == 1:
        return True
    a, b = ext
    ab = b - a
    n = np.linalg.norm(ab)
    return all(abs(_cross(a, b, p)) / n <= COLLINEAR_TOL for p in pts)


def convex_hull(points) -> np.ndarray:
    """Extreme points of ``points`` in CCW order.

    Degenerate inputs collapse to a point or a segment (tolerance 1e-10).
    """
    pts = dedup(points)
    if len(pts) == 1:
        return pts
    if _collinear(pts):
        return _segment_hull(pts)
    if len(pts) == 3:
        a, b, c = pts
        return pts if _cross(a, b, c) > 0 else np.array([a, c, b])
    # monotone chain
    order = sorted(map(tuple, pts))
    lower: list[tuple] = []
    for p in order:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple] = []
    for p in reversed(order):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def reachable_gradients(
    fn: SemiconcaveFn, x, tol_active: float = DEFAULT_TOL_ACTIVE
) -> GradientSet:
    """Gradients of the active branches at ``x`` (D*u for the min class)."""
    x1, x2 = _check_in_domain(fn, x)
    grads = [fn.branches[b].gradient(x1, x2) for b in active_set(fn, (x1, x2), tol_active)]
    return GradientSet(dedup(grads))


def superdifferential(gs: GradientSet) -> ConvexPolygon:
    """Convex hull of the reachable gradients."""
    hull = convex_hull(gs.points)
    if len(hull) >= 3 and len(hull) < len(gs):
        # D*u lies on the hull boundary; an interior input means a
        # non-generic branch configuration.
        on_boundary = [_on_boundary(hull, p) for p in gs.points]
        if not all(on_boundary):
            log.warning("reachable gradient strictly inside D+u: %s", gs.points)
    return ConvexPolygon(hull)


def _on_boundary(hull: np.ndarray, p, tol: float = 1e-10) -> bool:
    n = len(hull)
    for k in range(n):
        a, b = hull[k], hull[(k + 1) % n]
        ab = b - a
        t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
        if np.linalg.norm(a + t * ab - p) <= tol:
            return True
    return False


def diam(p: ConvexPolygon) -> float:
    v = p.vertices
    if len(v) < 2:
        return 0.0
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def subdiff_f(fn: SemiconcaveFn, x, tol_active: float = DEFAULT_TOL_ACTIVE) -> ConvexPolygon:
    """Subdifferential of the convex ``f = K|x|^2 - u``: ``2Kx - D+u(x)``."""
    x = np.asarray(_check_in_domain(fn, x))
    dplus = superdifferential(reachable_gradients(fn, x, tol_active))
    return ConvexPolygon(convex_hull(2.0 * fn.K * x - dplus.vertices))


def slice(p: ConvexPolygon, v) -> Interval:  # noqa: A001
    """Projection ``<v, P>`` of the polygon onto the unit direction ``v``."""
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError("slice direction must be a unit vector")
    proj = p.vertices @ v
    return Interval(float(proj.min()), float(proj.max()))


def horizontal_section(p: ConvexPolygon, y: float, tol: float = 1e-9) -> Interval:
    """``{x1 : (x1, y) in P}`` for a convex polygon ``P``.

    Heights within ``tol`` outside the vertical extent are clamped to it.
    """
    v = p.vertices
    ylo, yhi = v[:, 1].min(), v[:, 1].max()
    if y < ylo - tol or y > yhi + tol:
        raise GeometryError(f"empty horizontal section at height {y} (extent [{ylo}, {yhi}])")
    y = min(max(y, ylo), yhi)
    if len(v) == 1:
        return Interval(v[0, 0], v[0, 0])
    xs = []
    n = len(v)
    edges = [(v[0], v[1])] if n == 2 else [(v[k], v[(k + 1) % n]) for k in range(n)]
    for a, b in edges:
        if a[1] == b[1]:
            if a[1] == y:
                xs.extend([a[0], b[0]])
            continue
        lo, hi = sorted((a[1], b[1]))
        if lo <= y <= hi:
            t = (y - a[1]) / (b[1] - a[1])
            xs.append(a[0] + t * (b[0] - a[0]))
    if not xs:
        raise GeometryError(f"empty horizontal section at height {y}")
    return Interval(min(xs), max(xs))


def propagation_criterion(gs: GradientSet) -> bool:
    """Whether the hull boundary of ``gs`` holds a point outside ``gs``.

    For a finite set this happens exactly when it has two or more points.
    """
    return len(gs) >= 2


def is_singular(fn: SemiconcaveFn, x, tol_active: float = DEFAULT_TOL_ACTIVE) -> bool:
    return len(reachable_gradients(fn, x, tol_active)) >= 2


def hausdorff(a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = math.hypot(v[0], v[1])
    return v / n
