import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singprop.subdiff import (
    COLLINEAR_TOL,
    ConvexPolygon,
    GeometryError,
    GradientSet,
    convex_hull,
    dedup,
    diam,
    hausdorff,
    horizontal_section,
    is_singular,
    propagation_criterion,
    reachable_gradients,
    slice,
    subdiff_f,
    superdifferential,
)
from singprop.oracle import sampled_reachable_gradients

from .conftest import SEMISMOOTH_CASES, semismooth_widths, abs_fn, bowl_fn, cubic_fn, parabola_fn, triple_fn

TRI = [(1, 1), (1, -1), (-1, 0)]


def _as_set(points):
    return {tuple(np.round(p, 12) + 0.0) for p in np.asarray(points)}


def test_reachable_gradients_examples():
    assert _as_set(reachable_gradients(abs_fn(), (0, 0)).points) == {(0, 1), (0, -1)}
    assert _as_set(reachable_gradients(parabola_fn(), (0, 0)).points) == {(0, 1), (0, 0)}
    assert _as_set(reachable_gradients(triple_fn(), (0, 0)).points) == {(1, 1), (1, -1), (-1, 0)}


def test_superdifferential_examples():
    seg = superdifferential(GradientSet([(0, 1), (0, -1)]))
    np.testing.assert_array_equal(seg.vertices, [(0, -1), (0, 1)])
    tri = superdifferential(GradientSet(TRI))
    assert _as_set(tri.vertices) == set(TRI)
    a, b, c = tri.vertices
    assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0
    pt = superdifferential(GradientSet([(0, 0)]))
    assert len(pt) == 1


def test_diam_examples():
    assert diam(ConvexPolygon([(0, -1), (0, 1)])) == 2
    # oracle: max over the three pairwise distances
    brute = max(math.dist(p, q) for p, q in itertools.combinations(TRI, 2))
    assert brute == pytest.approx(math.sqrt(5), abs=1e-15)
    assert diam(superdifferential(GradientSet(TRI))) == pytest.approx(brute, abs=1e-12)
    assert diam(ConvexPolygon([(3, 4)])) == 0


def test_subdiff_f_examples():
    fn = abs_fn()
    np.testing.assert_array_equal(subdiff_f(fn, (0, 0)).vertices, [(0, -1), (0, 1)])
    # at (0.5, 0.5) only -x2 is active: grad (0, -1), so df = {(0, 1)}
    np.testing.assert_array_equal(subdiff_f(fn, (0.5, 0.5)).vertices, [(0, 1)])
    np.testing.assert_array_equal(subdiff_f(fn, (0.5, -0.5)).vertices, [(0, -1)])


def test_subdiff_f_with_curvature():
    fn = bowl_fn()
    assert fn.K == pytest.approx(2.1)
    x = np.array([0.1, 0.2])
    dplus = superdifferential(reachable_gradients(fn, x))
    expected = _as_set(2 * fn.K * x - dplus.vertices)
    assert _as_set(subdiff_f(fn, x).vertices) == expected


def test_slice_examples():
    tri = superdifferential(GradientSet(TRI))
    iv = slice(tri, (0, 1))
    assert (iv.lo, iv.hi) == (-1, 1)
    iv = slice(ConvexPolygon([(0, -1), (0, 1)]), (1, 0))
    assert (iv.lo, iv.hi) == (0, 0)
    v = (0.6, 0.8)
    iv = slice(ConvexPolygon([(2.0, -1.0)]), v)
    assert iv.lo == iv.hi == pytest.approx(0.4)


def test_slice_requires_unit_vector():
    with pytest.raises(ValueError):
        slice(ConvexPolygon([(0, 0)]), (1, 1))


def test_criterion_and_singularity_examples():
    assert propagation_criterion(GradientSet([(0, 1), (0, -1)]))
    assert not propagation_criterion(GradientSet([(0, 0)]))
    assert propagation_criterion(GradientSet(TRI))
    assert is_singular(abs_fn(), (0.7, 0))
    assert not is_singular(abs_fn(), (0, 0.5))
    assert not is_singular(bowl_fn(), (0, 0))


def test_horizontal_section():
    seg = ConvexPolygon([(0, -1), (0, 1)])
    iv = horizontal_section(seg, 0.3)
    assert iv.lo == iv.hi == 0
    tri = superdifferential(GradientSet(TRI))
    iv = horizontal_section(tri, 0.0)
    assert (iv.lo, iv.hi) == pytest.approx((-1, 1))
    with pytest.raises(GeometryError):
        horizontal_section(seg, 2.0)


points = st.lists(
    st.tuples(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False)),
    min_size=1,
    max_size=12,
)


@settings(max_examples=200, deadline=None)
@given(points)
def test_hull_vertices_are_extreme_and_ccw(pts):
    pts = np.array(pts)
    hull = convex_hull(pts)
    # every input point is inside or on the hull
    if len(hull) >= 3:
        n = len(hull)
        for k in range(n):
            a, b = hull[k], hull[(k + 1) % n]
            cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
            assert np.all(cross >= -1e-9 * max(1.0, np.linalg.norm(b - a)))
            c = hull[(k + 2) % n]
            assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0
    # hull vertices come from the input
    for v in hull:
        assert np.min(np.linalg.norm(pts - v, axis=1)) == 0


@settings(max_examples=200, deadline=None)
@given(points, st.floats(0, 2 * math.pi))
def test_slice_matches_raw_points(pts, th):
    v = np.array([math.cos(th), math.sin(th)])
    v = v / np.linalg.norm(v)
    gs = GradientSet(dedup(pts))
    hull = superdifferential(gs)
    iv = slice(hull, v)
    proj = gs.points @ v
    # exact unless a near-collinear set was collapsed to a segment
    tol = 0.0 if len(hull) >= 3 or _exactly_collinear(gs.points) else COLLINEAR_TOL
    assert iv.lo == pytest.approx(proj.min(), abs=tol + 1e-14)
    assert iv.hi == pytest.approx(proj.max(), abs=tol + 1e-14)


def _exactly_collinear(pts):
    if len(pts) < 3:
        return True
    d = pts[1:] - pts[0]
    return bool(np.all(d[:, 0] * d[0, 1] - d[:, 1] * d[0, 0] == 0))


@pytest.mark.parametrize("make", [abs_fn, parabola_fn, triple_fn, cubic_fn, bowl_fn])
def test_reachable_gradients_lie_on_hull_boundary(make, rng):
    fn = make()
    d = fn.domain
    for _ in range(100):
        x = rng.uniform([d.xmin, d.ymin], [d.xmax, d.ymax])
        gs = reachable_gradients(fn, x)
        hull = superdifferential(gs).vertices
        if len(hull) <= 2:
            continue
        for p in gs.points:
            assert min(np.linalg.norm(p - v) for v in hull) < 1e-10 or len(hull) == len(gs)


@pytest.mark.parametrize("make", [abs_fn, parabola_fn, triple_fn, cubic_fn, bowl_fn])
def test_criterion_equals_singularity(make, rng):
    fn = make()
    d = fn.domain
    for _ in range(100):
        x = rng.uniform([d.xmin, d.ymin], [d.xmax, d.ymax])
        assert propagation_criterion(reachable_gradients(fn, x)) == is_singular(fn, x)


def _near_kink(fn, x, radius):
    """True if a branch switch lies within ``radius`` of ``x`` without being active at ``x``."""
    vals = np.sort([b.value(*x) for b in fn.branches])
    return len(vals) > 1 and 1e-9 < vals[1] - vals[0] < 4 * fn.L * radius


@pytest.mark.parametrize("make", [abs_fn, parabola_fn, triple_fn, cubic_fn, bowl_fn])
def test_oracle_agreement_random_points(make):
    fn = make()
    rng = np.random.default_rng(7)
    d = fn.domain
    checked = 0
    while checked < 40:
        x = rng.uniform([d.xmin + 0.01, d.ymin + 0.01], [d.xmax - 0.01, d.ymax - 0.01])
        if _near_kink(fn, x, 1e-4):
            continue
        got = reachable_gradients(fn, x).points
        ref = sampled_reachable_gradients(fn, x, radius=1e-4, n=128).points
        assert hausdorff(got, ref) < 1e-3
        checked += 1


@pytest.mark.parametrize(
    "make, x",
    [(abs_fn, (0.0, 0.0)), (parabola_fn, (0.3, 0.09)), (triple_fn, (0.0, 0.0)), (cubic_fn, (0.2, 0.004))],
)
def test_oracle_agreement_singular_points(make, x):
    fn = make()
    got = reachable_gradients(fn, x).points
    ref = sampled_reachable_gradients(fn, x, radius=1e-4, n=256).points
    assert len(got) >= 2
    assert hausdorff(got, ref) < 1e-3


@pytest.mark.parametrize("make, x0, pair, q", SEMISMOOTH_CASES)
def test_semismooth_slices_shrink(make, x0, pair, q):
    """Along x_n = x0 + t_n q_n (on the singular curve when there is one),
    the width of <q, df(x_n)> tends to zero."""
    assert semismooth_widths(make, x0, pair, q)[-1] <= 1e-6
