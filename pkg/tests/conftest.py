import math

import numpy as np
import pytest

from singprop.core import Domain, make_fn
from singprop.subdiff import slice, subdiff_f
from singprop.tracer import project

SQUARE = Domain(-1, 1, -1, 1)

ACCEPTANCE_LINES: list[str] = []


def abs_fn():
    """min(x2, -x2) on [-1, 1]^2."""
    return make_fn([[(0, 1, 1)], [(0, 1, -1)]], SQUARE)


def parabola_fn(domain=Domain(-1, 1, -1, 2)):
    """min(x2 - x1^2, 0); the taller domain makes the arc exit at x1 = 1."""
    return make_fn([[(0, 1, 1), (2, 0, -1)], [(0, 0, 0)]], domain)


def triple_fn():
    """min(x1 + x2, x1 - x2, -x1)."""
    return make_fn([[(1, 0, 1), (0, 1, 1)], [(1, 0, 1), (0, 1, -1)], [(1, 0, -1)]], SQUARE)


def cubic_fn():
    """min(x2 - x1^3, -x2); singular curve x2 = x1^3 / 2 with an inflection."""
    return make_fn([[(0, 1, 1), (3, 0, -1)], [(0, 1, -1)]], SQUARE)


def bowl_fn():
    """min(r^2, 2 r^2)."""
    return make_fn([[(2, 0, 1), (0, 2, 1)], [(2, 0, 2), (0, 2, 2)]], SQUARE)


CUBIC_SEED = (-0.8, -0.256)

# (name, constructor, seed on the singular set)
TRACE_FIXTURES = [
    ("abs", abs_fn, (0.0, 0.0)),
    ("parabola", parabola_fn, (0.0, 0.0)),
    ("triple", triple_fn, (0.0, 0.0)),
    ("cubic", cubic_fn, CUBIC_SEED),
]


SEMISMOOTH_CASES = [
    # (fixture, base point, pair whose curve carries the sequence, direction q)
    (abs_fn, (0.0, 0.0), (0, 1), (1.0, 0.0)),
    (parabola_fn, (0.0, 0.0), (0, 1), (1.0, 0.0)),
    (parabola_fn, (0.0, 0.0), (0, 1), (-1.0, 0.0)),
    (triple_fn, (0.0, 0.0), (0, 1), (-1.0, 0.0)),
    (triple_fn, (0.0, 0.0), (0, 2), (1 / math.sqrt(5), -2 / math.sqrt(5))),
    (cubic_fn, (-0.8, -0.256), (0, 1), (1.0, 0.96)),
    (bowl_fn, (0.0, 0.0), (0, 1), (0.6, 0.8)),
]


def semismooth_widths(make, x0, pair, q, n_max=40):
    """Widths of <q, df(x_n)> along x_n = x0 + t_n q, t_n = 2^-n.

    Each x_n is moved onto the curve of ``pair`` when that is a short move,
    so sequences along a singular arc stay on it.
    """
    fn = make()
    x0 = np.array(x0)
    q = np.array(q) / np.linalg.norm(q)
    widths = []
    for n in range(1, n_max + 1):
        t = 2.0**-n
        x = x0 + t * q
        z = project(fn, pair, x, tol=1e-16)
        xn = z if z is not None and np.linalg.norm(z - x) < t else x
        # a fixed active tolerance would merge every branch within 1e-9 of
        # x0 into the active set; scale it with the distance instead
        widths.append(slice(subdiff_f(fn, xn, tol_active=1e-6 * t), q).length)
    return widths


def random_selection(rng, n=200):
    """A continuous selection among three cubics that cross inside [0, 1].

    phi_k = phi_0 + (x - r_k) q_k(x) with q_k > 0, so phi_k crosses phi_0 at
    r_k.  The selection switches to another cubic at the first grid point
    after a sign change of their difference, whenever a coin flip says so.
    """
    xs = np.linspace(0, 1, n)
    base = np.polynomial.Polynomial(rng.normal(size=4))
    phis = [base(xs)]
    for _ in range(2):
        r = rng.uniform(0.2, 0.8)
        q = np.polynomial.Polynomial([0.0, rng.normal(), rng.normal()])
        q = q + np.abs(q(xs)).max() + 0.5
        phis.append(phis[0] + (xs - r) * q(xs))
    cur = int(rng.integers(3))
    h = np.empty(n)
    h[0] = phis[cur][0]
    switches = 0
    for k in range(1, n):
        for m in range(3):
            if m != cur and (phis[cur][k - 1] - phis[m][k - 1]) * (phis[cur][k] - phis[m][k]) <= 0:
                if rng.uniform() < 0.7:
                    cur = m
                    switches += 1
                break
        h[k] = phis[cur][k]
    return xs, phis, h, switches


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
