"""Continuation of singular arcs along branch-equality curves.

For ``u = min_b f_b`` the singular set near a point where exactly the
branches ``i`` and ``j`` are minimal is the curve ``f_i = f_j``.  Arcs are
traced with an arclength predictor and a minimum-norm Newton corrector.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import DEFAULT_TOL_ACTIVE, SemiconcaveFn, active_set, active_tolerance
from .subdiff import DEDUP_TOL, diam, is_singular, reachable_gradients, superdifferential

log = logging.getLogger(__name__)

STOP_REASONS = ("left_domain", "triple_point", "gradient_coalescence", "max_length")

CORRECTOR_TOL = 1e-10
CORRECTOR_MAXIT = 25
MIN_STEP = 1e-8
COALESCENCE = 1e-7
T_PROBE = 1e-4


class PreconditionError(ValueError):
    pass


class TraceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ArcSample:
    x: np.ndarray
    s: float
    pair: tuple[int, int]
    tangent: np.ndarray
    dplus_diam: float


@dataclass(frozen=True)
class SingularArc:
    seed: np.ndarray
    q: np.ndarray
    samples: tuple[ArcSample, ...]
    stop_reason: str
    pair: tuple[int, int] = field(default=(0, 1))

    @property
    def points(self) -> np.ndarray:
        return np.array([smp.x for smp in self.samples])

    @property
    def s(self) -> np.ndarray:
        return np.array([smp.s for smp in self.samples])

    @property
    def tangents(self) -> np.ndarray:
        return np.array([smp.tangent for smp in self.samples])

    @property
    def diams(self) -> np.ndarray:
        return np.array([smp.dplus_diam for smp in self.samples])

    @property
    def length(self) -> float:
        return self.samples[-1].s


def _values(fn, x):
    return [b.value(x[0], x[1]) for b in fn.branches]


def _normal(fn, pair, x) -> np.ndarray:
    gi = fn.branches[pair[0]].gradient(x[0], x[1])
    gj = fn.branches[pair[1]].gradient(x[0], x[1])
    return np.array([gi[0] - gj[0], gi[1] - gj[1]])


def _residual(fn, pair, x) -> float:
    return fn.branches[pair[0]].value(x[0], x[1]) - fn.branches[pair[1]].value(x[0], x[1])


def _perp(n) -> np.ndarray:
    return np.array([n[1], -n[0]])


def project(fn: SemiconcaveFn, pair, x, tol: float = CORRECTOR_TOL, maxit: int = CORRECTOR_MAXIT):
    """Newton-correct ``x`` onto ``f_i = f_j`` along the curve normal.

    Returns ``None`` when the iteration does not converge.
    """
    x = np.array(x, dtype=float)
    for _ in range(maxit + 1):
        r = _residual(fn, pair, x)
        scale = max(1.0, abs(fn.branches[pair[0]].value(x[0], x[1])))
        if abs(r) <= tol * scale:
            return x
        n = _normal(fn, pair, x)
        nn = float(n @ n)
        if nn < COALESCENCE**2 or not math.isfinite(r):
            return None
        x = x - (r / nn) * n
    return None


def pair_gap(fn: SemiconcaveFn, pair, x) -> float:
    """Margin by which the pair stays below all other branches (negative if not)."""
    vals = _values(fn, x)
    others = [v for k, v in enumerate(vals) if k not in pair]
    if not others:
        return math.inf
    return min(others) - min(vals[pair[0]], vals[pair[1]])


def _pair_minimal(fn, pair, x, tol_active) -> bool:
    vals = _values(fn, x)
    return pair_gap(fn, pair, x) >= -active_tolerance(min(vals), tol_active)


def seed_directions(fn: SemiconcaveFn, x0, tol_active: float = DEFAULT_TOL_ACTIVE):
    """Admissible ``(pair, q)`` starting directions at the singular point ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    if not is_singular(fn, x0, tol_active):
        raise PreconditionError(f"{tuple(x0)} is not a singular point")
    out = []
    for pair in combinations(active_set(fn, x0, tol_active), 2):
        n = _normal(fn, pair, x0)
        if np.linalg.norm(n) <= DEDUP_TOL:
            continue
        base = _perp(n) / np.linalg.norm(n)
        for q in (base, -base):
            if _probe(fn, pair, x0, q, tol_active):
                out.append((pair, q))
    if not out:
        log.warning("no admissible propagation direction at %s", tuple(x0))
    return out


def _probe(fn, pair, x0, q, tol_active) -> bool:
    for t in (T_PROBE / 4, T_PROBE / 2, T_PROBE):
        z = project(fn, pair, x0 + t * q)
        if z is None or not fn.domain.contains(z, tol=0.0):
            return False
        if not _pair_minimal(fn, pair, z, tol_active):
            return False
        if np.dot(z - x0, q) <= 0:
            return False
    return True


def _make_sample(fn, pair, x, s, tangent, tol_active) -> ArcSample:
    d = diam(superdifferential(reachable_gradients(fn, x, tol_active)))
    return ArcSample(np.array(x), float(s), tuple(pair), np.array(tangent), d)


def _domain_event(fn, z) -> float:
    return 1.0 if z is None else fn.domain.signed_distance(z)


def _gap_event(fn, pair, z) -> float:
    return 1.0 if z is None else -pair_gap(fn, pair, z)


def _bisect(event, hi: float, iters: int = 80) -> float:
    """Largest step in ``[0, hi]`` with ``event(step) <= 0``, by bisection."""
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if event(mid) <= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return lo


def trace_arc(
    fn: SemiconcaveFn,
    x0,
    pair,
    q,
    step: float = 1e-3,
    max_len: float = 10.0,
    tol_active: float = DEFAULT_TOL_ACTIVE,
    max_steps: int = 1_000_000,
) -> SingularArc:
    """Trace the singular arc from ``x0`` along ``f_i = f_j`` starting in direction ``q``.

    The parameter ``s`` is the accumulated chord length, so the arc is
    1-Lipschitz in ``s``.  Tracing stops when the arc leaves the domain,
    meets a third branch, loses gradient separation, or reaches ``max_len``.
    Domain exits and triple points are located by bisection so that the
    last sample lies on the boundary (or at the triple point).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    pair = tuple(int(p) for p in pair)
    x = np.asarray(x0, dtype=float)
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    n0 = _normal(fn, pair, x)
    if np.linalg.norm(n0) < COALESCENCE:
        raise PreconditionError("gradients of the pair coincide at the seed")
    t = _perp(n0) / np.linalg.norm(n0)
    if np.dot(t, q) < 0:
        t = -t
    if np.dot(t, q) < 1 - 1e-9:
        raise PreconditionError("q is not tangent to the branch-equality curve")

    samples = [_make_sample(fn, pair, x, 0.0, t, tol_active)]
    s = 0.0
    h = step
    stop = None

    def advance(hh):
        return project(fn, pair, x + hh * t)

    for _ in range(max_steps):
        remaining = max_len - s
        if remaining <= 1e-12 * max(1.0, max_len):
            stop = "max_length"
            break
        hh = min(h, remaining)
        z = advance(hh)
        probe = z if z is not None else x + hh * t
        if np.linalg.norm(_normal(fn, pair, probe)) < COALESCENCE:
            stop = "gradient_coalescence"
            break
        ok = False
        if z is not None:
            n = _normal(fn, pair, z)
            tn = _perp(n) / np.linalg.norm(n)
            if np.dot(tn, t) < 0:
                tn = -tn
            ok = (
                0 < np.linalg.norm(z - x)
                and np.linalg.norm(z - (x + hh * t)) <= 0.5 * hh
                and np.dot(tn, t) > math.cos(0.5)
            )
        if not ok:
            h *= 0.5
            if h < MIN_STEP:
                raise TraceError(
                    f"corrector failed below minimum step near {tuple(x)} (pair {pair}, s={s:.6g})"
                )
            continue

        out_of_domain = fn.domain.signed_distance(z) > 0
        vals = _values(fn, z)
        blocked = pair_gap(fn, pair, z) < -1e-12 * max(1.0, abs(min(vals)))
        if out_of_domain or blocked:
            events = {}
            if out_of_domain:
                events["left_domain"] = _bisect(lambda hs: _domain_event(fn, advance(hs)), hh)
            if blocked:
                events["triple_point"] = _bisect(lambda hs: _gap_event(fn, pair, advance(hs)), hh)
            stop = min(events, key=events.get)
            z = advance(events[stop])
            if z is not None and np.linalg.norm(z - x) > 0:
                d = fn.domain
                z = np.clip(z, [d.xmin, d.ymin], [d.xmax, d.ymax])
                n = _normal(fn, pair, z)
                tn = _perp(n) / np.linalg.norm(n)
                if np.dot(tn, t) < 0:
                    tn = -tn
                s += float(np.linalg.norm(z - x))
                samples.append(_make_sample(fn, pair, z, s, tn, tol_active))
            break

        s += float(np.linalg.norm(z - x))
        samples.append(_make_sample(fn, pair, z, s, tn, tol_active))
        x, t = z, tn
        h = step
    else:
        stop = "max_length"

    return SingularArc(np.asarray(x0, dtype=float), q, tuple(samples), stop, pair)


@dataclass(frozen=True)
class CYReport:
    """Checks of the propagation properties on a traced arc."""

    initial_angle: float
    early_angle_max: float
    min_diam: float
    delta_min: float
    lipschitz_ratio: float
    membership: bool | None

    @property
    def tangent_ok(self) -> bool:
        return self.initial_angle <= 1e-6

    @property
    def diam_ok(self) -> bool:
        return self.min_diam >= self.delta_min and self.min_diam > 0

    @property
    def lipschitz_ok(self) -> bool:
        return self.lipschitz_ratio <= 1 + 1e-6

    @property
    def passed(self) -> bool:
        return self.tangent_ok and self.diam_ok and self.lipschitz_ok and self.membership is not False

    def as_dict(self) -> dict:
        return {
            "initial_angle": self.initial_angle,
            "early_angle_max": self.early_angle_max,
            "min_diam": self.min_diam,
            "delta_min": self.delta_min,
            "lipschitz_ratio": self.lipschitz_ratio,
            "membership": self.membership,
            "passed": self.passed,
        }


def _angle(a, b) -> float:
    return abs(math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]))


def lipschitz_ratio(points: np.ndarray, s: np.ndarray, chunk: int = 512) -> float:
    worst = 0.0
    n = len(s)
    for a in range(0, n, chunk):
        P = points[a : a + chunk]
        S = s[a : a + chunk]
        d = np.sqrt(((P[:, None, :] - points[None, :, :]) ** 2).sum(-1))
        ds = np.abs(S[:, None] - s[None, :])
        mask = ds > 0
        if mask.any():
            worst = max(worst, float((d[mask] / ds[mask]).max()))
    return worst


def verify_cy(arc: SingularArc, delta_min: float = 0.0, fn: SemiconcaveFn | None = None,
              tol_active: float = DEFAULT_TOL_ACTIVE) -> CYReport:
    """Initial tangent, early tangent drift, diameter bound and Lipschitz ratio.

    With ``fn`` given, also checks that every sample is a singular point.
    """
    if not arc.samples:
        raise ValueError("empty arc")
    tangents = arc.tangents
    s = arc.s
    early = s <= 0.1 * arc.length
    angles = [_angle(t, arc.q) for t in tangents[early]]
    membership = None
    if fn is not None:
        membership = all(is_singular(fn, smp.x, tol_active) for smp in arc.samples)
    return CYReport(
        initial_angle=_angle(tangents[0], arc.q),
        early_angle_max=max(angles),
        min_diam=float(arc.diams.min()),
        delta_min=float(delta_min),
        lipschitz_ratio=lipschitz_ratio(arc.points, s) if len(s) > 1 else 1.0,
        membership=membership,
    )


CSV_HEADER = ("s", "x1", "x2", "i", "j", "t1", "t2", "diam")


def arc_rows(arc: SingularArc):
    for smp in arc.samples:
        yield (smp.s, smp.x[0], smp.x[1], smp.pair[0], smp.pair[1], smp.tangent[0], smp.tangent[1], smp.dplus_diam)
