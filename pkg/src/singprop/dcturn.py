"""Graph reparametrization, DC decompositions and turn of traced arcs.

Pipeline for one arc: rotate so the arc leaves the origin along the
positive x1-axis, keep the part where ``x1`` grows with slope at least 1/2,
and write the resulting graph ``g`` as a difference of convex functions.
Two routes are provided: a Jordan split of the slope sequence of ``g``, and
the partition/support-line construction, which builds one DC function per
level band and checks that ``g`` is a continuous selection among them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_TOL_ACTIVE, Frame, SemiconcaveFn
from .subdiff import ConvexPolygon, horizontal_section, slice, subdiff_f
from .tracer import SingularArc, trace_arc

E2 = np.array([0.0, 1.0])
CONVEXITY_TOL = 1e-9


class ArcTooShortError(ValueError):
    pass


class ClassificationError(RuntimeError):
    pass


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class GraphParam:
    """Graph ``x -> (x, g(x))`` of an arc in an aligned frame."""

    xs: np.ndarray
    gs: np.ndarray
    frame: Frame

    @property
    def alpha(self) -> float:
        return float(self.xs[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.gs) / np.diff(self.xs)

    @property
    def lipschitz(self) -> float:
        return float(np.abs(self.slopes).max())


@dataclass(frozen=True)
class DCDecomposition:
    """``g = y1 - y2 + offset`` on ``xs`` with ``y1``, ``y2`` convex."""

    xs: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    offset: float

    def reconstruct(self) -> np.ndarray:
        return self.y1 - self.y2 + self.offset

    def slopes(self) -> tuple[np.ndarray, np.ndarray]:
        dx = np.diff(self.xs)
        return np.diff(self.y1) / dx, np.diff(self.y2) / dx

    def convexity_defect(self) -> float:
        """Most negative slope increment of ``y1`` or ``y2`` (0 if convex)."""
        s1, s2 = self.slopes()
        if len(s1) < 2:
            return 0.0
        return float(min(0.0, np.diff(s1).min(), np.diff(s2).min()))

    def reconstruction_error(self, gs) -> float:
        return float(np.abs(self.reconstruct() - np.asarray(gs)).max())

    def lipschitz(self) -> float:
        s1, s2 = self.slopes()
        return float(max(np.abs(s1).max(), np.abs(s2).max()))


def reparametrize(arc: SingularArc, min_slope: float = 0.5) -> GraphParam:
    """Graph parametrization of the initial part of ``arc``.

    The frame sends the seed to the origin and the initial direction to
    (1, 0).  The arc is cut at the first chord along which the first
    coordinate grows slower than ``min_slope`` per unit arclength.
    """
    if len(arc.samples) < 3:
        raise ArcTooShortError("need at least 3 samples")
    frame = Frame.aligning(arc.seed, arc.q)
    z = frame.apply(arc.points)
    s = arc.s
    rate = np.diff(z[:, 0]) / np.diff(s)
    bad = np.nonzero(rate < min_slope)[0]
    keep = len(z) if len(bad) == 0 else bad[0] + 1
    if keep < 3:
        raise ArcTooShortError(f"only {keep} samples before the slope of x1 drops below {min_slope}")
    xs = z[:keep, 0].copy()
    gs = z[:keep, 1].copy()
    xs[0] = 0.0
    gs[0] = 0.0
    return GraphParam(xs, gs, frame)


def jordan_split(xs, gs) -> DCDecomposition:
    """Split ``g`` into convex parts via the Jordan decomposition of its slopes."""
    xs = np.asarray(xs, dtype=float)
    gs = np.asarray(gs, dtype=float)
    if len(xs) < 3:
        raise ValueError("need at least 3 grid points")
    dx = np.diff(xs)
    if np.any(dx <= 0):
        raise ValueError("grid must be strictly increasing")
    slopes = np.diff(gs) / dx
    jumps = np.diff(slopes)
    pos = np.concatenate([[0.0], np.cumsum(np.maximum(jumps, 0.0))])
    neg = np.concatenate([[0.0], np.cumsum(np.maximum(-jumps, 0.0))])
    s1 = max(slopes[0], 0.0) + pos
    s2 = max(-slopes[0], 0.0) + neg
    y1 = np.concatenate([[0.0], np.cumsum(s1 * dx)])
    y2 = np.concatenate([[0.0], np.cumsum(s2 * dx)])
    return DCDecomposition(xs, y1, y2, float(gs[0]))


def jordan_dc(gp: GraphParam) -> DCDecomposition:
    return jordan_split(gp.xs, gp.gs)


@dataclass(frozen=True)
class PartitionClassification:
    levels: np.ndarray
    assignment: np.ndarray
    delta: float

    @property
    def sets(self) -> dict[int, np.ndarray]:
        return {int(i): np.nonzero(self.assignment == i)[0] for i in np.unique(self.assignment)}

    @property
    def mesh(self) -> float:
        return float(np.diff(self.levels).max())


@dataclass(frozen=True)
class Step3Result:
    """Output of the band construction.

    ``phis[i]`` samples the DC function of band ``i`` on the whole grid.
    ``support_defect`` is the largest ``a_x(t) - omega(t)`` over ``x, t`` in
    the same band (should be <= 0 up to rounding).
    """

    classification: PartitionClassification
    phis: dict[int, np.ndarray]
    selection_residual: float
    support_defect: float
    slices: np.ndarray


def _section_midpoint(poly: ConvexPolygon, y: float) -> float:
    sec = horizontal_section(poly, y)
    return 0.5 * (sec.lo + sec.hi)


def support_envelope(anchors, values, slopes, ts) -> np.ndarray:
    """``max_x (values[x] + slopes[x] * (t - anchors[x]))`` evaluated at ``ts``."""
    anchors = np.asarray(anchors, dtype=float)
    values = np.asarray(values, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    ts = np.asarray(ts, dtype=float)
    lines = values[:, None] + slopes[:, None] * (ts[None, :] - anchors[:, None])
    return lines.max(axis=0)


def step3_construct(
    fn_t: SemiconcaveFn, gp: GraphParam, tol_active: float = DEFAULT_TOL_ACTIVE
) -> Step3Result:
    """Band-wise convex extensions on the graph of ``gp``.

    ``fn_t`` must already be expressed in ``gp.frame`` coordinates.  For
    ``f = K|z|^2 - u`` the vertical extent of the subdifferential of ``f``
    along the arc is at least ``delta``; levels with mesh below ``delta/2``
    therefore admit, at every grid point, two adjacent levels inside it.
    """
    xs, gs = gp.xs, gp.gs
    pts = np.column_stack([xs, gs])
    polys = [subdiff_f(fn_t, p, tol_active) for p in pts]
    ivs = [slice(P, E2) for P in polys]
    slices = np.array([[iv.lo, iv.hi] for iv in ivs])
    delta = float((slices[:, 1] - slices[:, 0]).min())
    if delta <= 0:
        raise ClassificationError("vertical extent of the subdifferential vanishes on the arc")

    L = fn_t.L
    eps = 1e-6
    width = 2 * (L + eps)
    p = math.ceil(width / (delta / 2.01))
    levels = np.linspace(-L - eps, L + eps, p + 1)

    assign = np.empty(len(xs), dtype=int)
    for k, iv in enumerate(ivs):
        inside = (levels >= iv.lo) & (levels <= iv.hi)
        ok = np.nonzero(inside[1:] & inside[:-1])[0]
        if len(ok) == 0:
            raise ClassificationError(
                f"no admissible level pair at x={xs[k]:.6g}: slice [{iv.lo:.6g}, {iv.hi:.6g}], "
                f"mesh {np.diff(levels).max():.6g}"
            )
        assign[k] = ok[0] + 1
    cls = PartitionClassification(levels, assign, delta)

    K = fn_t.K
    fvals = np.array([K * (x * x + g * g) - min(b.value(x, g) for b in fn_t.branches) for x, g in pts])
    phis: dict[int, np.ndarray] = {}
    support_defect = -math.inf
    for i, idx in cls.sets.items():
        yi, yim = levels[i], levels[i - 1]
        omega1 = fvals[idx] - yi * gs[idx]
        omega2 = fvals[idx] - yim * gs[idx]
        p1 = np.array([_section_midpoint(polys[k], yi) for k in idx])
        p2 = np.array([_section_midpoint(polys[k], yim) for k in idx])
        c1 = support_envelope(xs[idx], omega1, p1, xs)
        c2 = support_envelope(xs[idx], omega2, p2, xs)
        phis[i] = (c2 - c1) / (yi - yim)
        support_defect = max(
            support_defect,
            float((c1[idx] - omega1).max()),
            float((c2[idx] - omega2).max()),
        )
    chosen = np.array([phis[i][k] for k, i in enumerate(assign)])
    residual = float(np.abs(chosen - gs).max())
    return Step3Result(cls, phis, residual, support_defect, slices)


@dataclass(frozen=True)
class MixingResult:
    decomposition: DCDecomposition
    realizer: np.ndarray


def mixing_select(phis, h, xs, tol: float = 1e-8, lipschitz: float | None = None) -> MixingResult:
    """DC decomposition of a continuous selection ``h`` among ``phis``.

    ``phis`` is a sequence (or mapping) of arrays sampled on ``xs``.  The
    returned ``realizer`` lists, per grid point, the first key whose
    function matches ``h`` there.
    """
    xs = np.asarray(xs, dtype=float)
    h = np.asarray(h, dtype=float)
    keys = list(phis.keys()) if isinstance(phis, dict) else list(range(len(phis)))
    table = np.array([np.asarray(phis[k], dtype=float) for k in keys])
    match = np.abs(table - h[None, :]) <= tol
    missing = np.nonzero(~match.any(axis=0))[0]
    if len(missing):
        raise SelectionError(f"h matches no candidate at grid indices {missing[:10].tolist()}")
    if lipschitz is not None:
        jumps = np.abs(np.diff(h)) - lipschitz * np.diff(xs)
        if np.any(jumps > tol):
            raise SelectionError("h is not continuous at the stated Lipschitz bound")
    realizer = np.array([keys[k] for k in match.argmax(axis=0)])
    return MixingResult(jordan_split(xs, h), realizer)


def _turning(a, b) -> float:
    return abs(math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]))


def turn(points, start_tangent=None, end_tangent=None) -> float:
    """Total turn of a polyline: the sum of its unsigned exterior angles.

    With ``start_tangent``/``end_tangent`` the angles between those
    directions and the first/last segment are included, which is the turn
    of a curve with known end half-tangents inscribed by the polyline.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2 or (len(pts) < 3 and start_tangent is None and end_tangent is None):
        raise ValueError("need at least 3 points")
    seg = np.diff(pts, axis=0)
    if np.any(np.hypot(seg[:, 0], seg[:, 1]) == 0):
        raise ValueError("repeated consecutive points")
    a = np.arctan2(seg[:-1, 0] * seg[1:, 1] - seg[:-1, 1] * seg[1:, 0], (seg[:-1] * seg[1:]).sum(1))
    total = float(np.abs(a).sum())
    if start_tangent is not None:
        total += _turning(start_tangent, seg[0])
    if end_tangent is not None:
        total += _turning(seg[-1], end_tangent)
    return total


def graph_slope_turn(xs, gs) -> float:
    """Turn of the graph polyline from the slope sequence alone."""
    s = np.diff(gs) / np.diff(xs)
    return float(np.abs(np.diff(np.arctan(s))).sum())


def arc_turn(arc: SingularArc) -> float:
    """Turn of the arc polyline including its end half-tangents."""
    return turn(arc.points, arc.samples[0].tangent, arc.samples[-1].tangent)


@dataclass(frozen=True)
class TurnCertificate:
    turn_coarse: float
    turn_fine: float
    tol: float

    @property
    def converged(self) -> bool:
        return abs(self.turn_coarse - self.turn_fine) <= self.tol

    def as_dict(self) -> dict:
        return {
            "turn_coarse": self.turn_coarse,
            "turn_fine": self.turn_fine,
            "tol": self.tol,
            "converged": self.converged,
        }


def finite_turn_certificate(
    fn: SemiconcaveFn,
    arc: SingularArc,
    tol: float = 1e-3,
    step: float | None = None,
    max_len: float | None = None,
    tol_active: float = DEFAULT_TOL_ACTIVE,
) -> TurnCertificate:
    """Compare the turn of ``arc`` against a retrace at half the step.

    ``step`` defaults to the largest chord of ``arc``; ``max_len`` to its
    length, so both traces cover the same piece of curve.
    """
    if step is None:
        step = float(np.diff(arc.s).max())
    if max_len is None:
        max_len = arc.length
    fine = trace_arc(fn, arc.seed, arc.pair, arc.q, step / 2, max_len, tol_active)
    return TurnCertificate(arc_turn(arc), arc_turn(fine), tol)
