"""Brute-force ground truth: finite differences, grid scans, sampled gradients.

Nothing here uses the active-set calculus of :mod:`singprop.subdiff`; only
function values of ``u`` enter, so these routines can check it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .core import DomainError, SemiconcaveFn
from .subdiff import GradientSet

DEFAULT_SEED = 20090067
NONDIFFERENTIABLE = "nondifferentiable"


class SamplingError(RuntimeError):
    pass


def rng_seed(seed: int | None = None) -> int:
    if seed is not None:
        return seed
    return int(os.environ.get("SINGPROP_SEED", DEFAULT_SEED))


def _u(fn: SemiconcaveFn, x1, x2):
    vals = [b.value(x1, x2) for b in fn.branches]
    out = vals[0]
    for v in vals[1:]:
        out = np.minimum(out, v)
    return out


def _numeric_gradient(fn, x1, x2, h, threshold):
    """Vectorized core of :func:`numeric_gradient`; returns (g1, g2, ok)."""
    grads = []
    ok = True
    for axis in (0, 1):
        e1, e2 = (1.0, 0.0) if axis == 0 else (0.0, 1.0)

        def u(t):
            return _u(fn, x1 + t * e1, x2 + t * e2)

        u0 = u(0.0)
        up, um = u(h), u(-h)
        up2, um2 = u(h / 2), u(-h / 2)
        central = (up - um) / (2 * h)
        central2 = (up2 - um2) / h
        # Richardson-extrapolated one-sided quotients
        forward = 2 * ((up2 - u0) / (h / 2)) - (up - u0) / h
        backward = 2 * ((u0 - um2) / (h / 2)) - (u0 - um) / h
        ok = ok & (np.abs(central - central2) < threshold) & (np.abs(forward - backward) < threshold)
        grads.append((4 * central2 - central) / 3)
    return grads[0], grads[1], ok


def numeric_gradient(fn: SemiconcaveFn, x, h: float = 1e-4, threshold: float | None = None):
    """Finite-difference gradient of ``u`` at ``x`` or ``"nondifferentiable"``.

    Central quotients at ``h`` and ``h/2`` must agree, and the Richardson
    extrapolated forward and backward quotients must agree, both to within
    ``threshold`` (default ``10 h``).  The one-sided comparison is what
    catches kinks through ``x`` itself, where central quotients are blind.
    """
    if threshold is None:
        threshold = 10 * h
    x1, x2 = float(x[0]), float(x[1])
    d = fn.domain
    if not (d.xmin + h <= x1 <= d.xmax - h and d.ymin + h <= x2 <= d.ymax - h):
        raise DomainError(f"{(x1, x2)} is closer than {h} to the domain boundary")
    g1, g2, ok = _numeric_gradient(fn, x1, x2, h, threshold)
    if not ok:
        return NONDIFFERENTIABLE
    return np.array([float(g1), float(g2)])


@dataclass(frozen=True)
class ScanResult:
    h: float
    flagged: np.ndarray

    def __len__(self):
        return len(self.flagged)


def _active_masks(fn, X1, X2, tol):
    vals = np.array([np.broadcast_to(b.value(X1, X2), X1.shape) for b in fn.branches])
    m = vals.min(axis=0)
    return vals <= m + tol * np.maximum(1.0, np.abs(m)), vals


def _any_corner(m):
    return m[:-1, :-1] | m[1:, :-1] | m[:-1, 1:] | m[1:, 1:]


def grid_singularity_scan(
    fn: SemiconcaveFn, h: float, fd_step: float | None = None, threshold: float | None = None
) -> ScanResult:
    """Cells of size ``h`` (anchored at the lower-left domain corner) that
    look non-differentiable.

    A cell is flagged if finite differences fail at its center, or if the
    set of minimal branches differs between its corners because two branches
    cross there with different gradients at the center.
    """
    d = fn.domain
    if h > min(d.width, d.height) / 8:
        raise ValueError("cell size must be at most 1/8 of the smaller domain extent")
    nx = int(round(d.width / h))
    ny = int(round(d.height / h))
    xs = d.xmin + h * np.arange(nx + 1)
    ys = d.ymin + h * np.arange(ny + 1)
    C1, C2 = np.meshgrid(xs, ys, indexing="ij")
    act, vals = _active_masks(fn, C1, C2, 1e-9)

    # corner active sets differ if any branch is active at some but not all corners
    corners = [act[:, :-1, :-1], act[:, 1:, :-1], act[:, :-1, 1:], act[:, 1:, 1:]]
    any_c = corners[0] | corners[1] | corners[2] | corners[3]
    all_c = corners[0] & corners[1] & corners[2] & corners[3]
    changes = any_c & ~all_c

    M1, M2 = np.meshgrid(xs[:-1] + h / 2, ys[:-1] + h / 2, indexing="ij")
    grads = np.array(
        [[np.broadcast_to(g, M1.shape) for g in b.gradient(M1, M2)] for b in fn.branches]
    )
    cgrads = [[np.broadcast_to(g, C1.shape) for g in b.gradient(C1, C2)] for b in fn.branches]
    involved = any_c
    distinct = np.zeros(M1.shape, dtype=bool)
    nb = len(fn.branches)
    for a in range(nb):
        for b in range(a + 1, nb):
            both = involved[a] & involved[b] & (changes[a] | changes[b])
            # a genuine crossing: the difference takes both signs on the
            # corners, or vanishes at a corner with nonzero gradient
            diff = vals[a] - vals[b]
            tol = 1e-9 * np.maximum(1.0, np.abs(vals[a]))
            pos, neg = diff > tol, diff < -tol
            gd = np.hypot(cgrads[a][0] - cgrads[b][0], cgrads[a][1] - cgrads[b][1])
            transversal = ~pos & ~neg & (gd > 1e-10)
            both &= (_any_corner(pos) & _any_corner(neg)) | _any_corner(transversal)
            sep = np.hypot(grads[a, 0] - grads[b, 0], grads[a, 1] - grads[b, 1]) > 1e-10
            distinct |= both & sep
    if fd_step is None:
        fd_step = min(1e-4, h / 8)
    if threshold is None:
        threshold = 10 * fd_step
    _, _, ok = _numeric_gradient(fn, M1, M2, fd_step, threshold)
    flagged = distinct | ~np.asarray(ok, dtype=bool)
    centers = np.column_stack([M1[flagged], M2[flagged]])
    order = np.lexsort((centers[:, 1], centers[:, 0])) if len(centers) else []
    return ScanResult(h, centers[order] if len(centers) else np.zeros((0, 2)))


def sampled_reachable_gradients(
    fn: SemiconcaveFn,
    x,
    radius: float = 1e-4,
    n: int = 256,
    seed: int | None = None,
    link: float = 1e-3,
) -> GradientSet:
    """Cluster centers of finite-difference gradients sampled around ``x``."""
    if n < 64:
        raise ValueError("need n >= 64 samples")
    rng = np.random.default_rng(rng_seed(seed))
    x = np.asarray(x, dtype=float)
    r = radius * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0, 2 * np.pi, size=n)
    P1 = x[0] + r * np.cos(th)
    P2 = x[1] + r * np.sin(th)
    fd = radius / 100
    g1, g2, ok = _numeric_gradient(fn, P1, P2, fd, 10 * fd)
    ok = np.asarray(ok, dtype=bool) & np.isfinite(g1) & np.isfinite(g2)
    if not ok.any():
        raise SamplingError("no differentiability points among the samples")
    G = np.column_stack([np.asarray(g1)[ok], np.asarray(g2)[ok]])
    if len(G) == 1:
        return GradientSet(G)
    labels = fcluster(linkage(G, method="single"), t=link, criterion="distance")
    centers = np.array([G[labels == k].mean(axis=0) for k in np.unique(labels)])
    # sort on rounded keys so sampling noise cannot reorder the output
    key = np.round(centers, 6)
    order = np.lexsort((key[:, 1], key[:, 0]))
    return GradientSet(centers[order])
