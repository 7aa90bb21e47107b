import math

import numpy as np
import pytest

from singprop.core import Domain, DomainError, make_fn
from singprop.oracle import (
    NONDIFFERENTIABLE,
    grid_singularity_scan,
    numeric_gradient,
    sampled_reachable_gradients,
)
from singprop.subdiff import hausdorff

from .conftest import SQUARE, abs_fn, bowl_fn, parabola_fn, triple_fn


def test_numeric_gradient_examples():
    fn = abs_fn()
    np.testing.assert_allclose(numeric_gradient(fn, (0.3, 0.5)), (0, -1), atol=1e-10)
    np.testing.assert_allclose(numeric_gradient(fn, (0.3, -0.5)), (0, 1), atol=1e-10)
    assert numeric_gradient(fn, (0.3, 0.0)) == NONDIFFERENTIABLE


def test_numeric_gradient_catches_kink_through_point():
    # central quotients of |x2| at x2 = 0 both vanish; only the one-sided
    # comparison sees the kink
    assert numeric_gradient(triple_fn(), (0.0, 0.0)) == NONDIFFERENTIABLE
    assert numeric_gradient(parabola_fn(), (0.5, 0.25)) == NONDIFFERENTIABLE


def test_numeric_gradient_smooth_accuracy(rng):
    fn = bowl_fn()
    for _ in range(50):
        x = rng.uniform(-0.9, 0.9, 2)
        # min(r^2, 2 r^2) = r^2 everywhere
        np.testing.assert_allclose(numeric_gradient(fn, x), 2 * x, atol=1e-8)


def test_numeric_gradient_near_boundary():
    with pytest.raises(DomainError):
        numeric_gradient(abs_fn(), (1 - 1e-5, 0.5))


def test_scan_abs_two_rows():
    scan = grid_singularity_scan(abs_fn(), 0.25)
    xs = np.arange(-0.875, 1.0, 0.25)
    expected = np.array([(x, y) for x in xs for y in (-0.125, 0.125)])
    np.testing.assert_allclose(scan.flagged, expected, atol=1e-15)


def test_scan_smooth_function_is_empty():
    fn = make_fn([[(2, 0, 1), (0, 2, 1)]], SQUARE)
    assert len(grid_singularity_scan(fn, 0.05)) == 0
    assert len(grid_singularity_scan(bowl_fn(), 0.05)) == 0


def test_scan_rejects_coarse_cells():
    with pytest.raises(ValueError):
        grid_singularity_scan(abs_fn(), 0.3)


@pytest.mark.parametrize("h", [0.05, 0.02])
def test_scan_parabola_hausdorff(h):
    fn = parabola_fn()
    scan = grid_singularity_scan(fn, h)
    # oracle: dense sampling of the singular curve inside the domain
    t = np.linspace(-1, 1, 20001)
    curve = np.column_stack([t, t * t])
    assert hausdorff(scan.flagged, curve) <= h * math.sqrt(2)


def test_scan_grows_as_threshold_shrinks():
    fn = parabola_fn()
    counts = [len(grid_singularity_scan(fn, 0.05, threshold=th)) for th in (1e-1, 1e-3, 1e-5, 1e-7)]
    assert counts == sorted(counts)


def test_scan_output_is_sorted():
    f = grid_singularity_scan(triple_fn(), 0.05).flagged
    order = np.lexsort((f[:, 1], f[:, 0]))
    np.testing.assert_array_equal(order, np.arange(len(f)))


def test_sampled_gradients_examples():
    got = sampled_reachable_gradients(abs_fn(), (0, 0)).points
    np.testing.assert_allclose(got, [(0, -1), (0, 1)], atol=1e-6)
    got = sampled_reachable_gradients(triple_fn(), (0, 0)).points
    np.testing.assert_allclose(got, [(-1, 0), (1, -1), (1, 1)], atol=1e-6)
    got = sampled_reachable_gradients(abs_fn(), (0.2, 0.5)).points
    np.testing.assert_allclose(got, [(0, -1)], atol=1e-6)


def test_sampled_gradients_seed_from_environment(monkeypatch):
    fn = parabola_fn()
    x = (0.3, 0.09)
    monkeypatch.setenv("SINGPROP_SEED", "5")
    a = sampled_reachable_gradients(fn, x).points
    b = sampled_reachable_gradients(fn, x).points
    c = sampled_reachable_gradients(fn, x, seed=5).points
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)


def test_sampled_gradients_rejects_small_n():
    with pytest.raises(ValueError):
        sampled_reachable_gradients(abs_fn(), (0, 0), n=10)


def test_scan_domain_anchor():
    fn = make_fn([[(0, 1, 1)], [(0, 1, -1)]], Domain(0, 2, -1, 1))
    f = grid_singularity_scan(fn, 0.25).flagged
    assert f[:, 0].min() == pytest.approx(0.125)
