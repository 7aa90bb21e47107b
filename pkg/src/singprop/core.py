"""Function model: polynomial branches, rectangular domains, frames.

A semiconcave function is represented as ``u(x) = min_b f_b(x)`` where each
branch ``f_b`` is a bivariate polynomial.  Everything downstream consumes
only :class:`SemiconcaveFn` and :class:`Frame`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_DEGREE = 8
SAFETY = 1.05
DEFAULT_TOL_ACTIVE = 1e-9


class DomainError(ValueError):
    """Raised when a point lies outside the function's domain."""


class EvaluationError(ArithmeticError):
    """Raised when branch values or derivatives are not finite."""


def _as_point(x) -> tuple[float, float]:
    x1, x2 = x
    return float(x1), float(x2)


@dataclass(frozen=True)
class Branch:
    """Bivariate polynomial ``sum c * x1**i * x2**j``.

    ``terms`` holds ``(i, j, c)`` triples with distinct exponent pairs.
    Zero coefficients are kept, so ``Branch([(0, 0, 0.0)])`` is the zero
    polynomial.
    """

    terms: tuple[tuple[int, int, float], ...]

    def __init__(self, terms: Iterable[Sequence[float]], max_degree: int = MAX_DEGREE):
        cleaned = []
        seen = set()
        for term in terms:
            i, j, c = term
            if int(i) != i or int(j) != j or i < 0 or j < 0:
                raise ValueError(f"exponents must be non-negative integers, got ({i}, {j})")
            i, j = int(i), int(j)
            if i + j > max_degree:
                raise ValueError(f"term x1^{i} x2^{j} exceeds degree cap {max_degree}")
            if (i, j) in seen:
                raise ValueError(f"duplicate exponent pair ({i}, {j})")
            if not math.isfinite(c):
                raise ValueError("coefficients must be finite")
            seen.add((i, j))
            cleaned.append((i, j, float(c)))
        object.__setattr__(self, "terms", tuple(sorted(cleaned)))

    @classmethod
    def from_coeffs(cls, coeffs: np.ndarray, drop_below: float = 0.0) -> "Branch":
        """Build from a coefficient matrix ``coeffs[i, j]``."""
        terms = [
            (i, j, float(coeffs[i, j]))
            for i in range(coeffs.shape[0])
            for j in range(coeffs.shape[1])
            if abs(coeffs[i, j]) > drop_below
        ]
        if not terms:
            terms = [(0, 0, 0.0)]
        return cls(terms)

    @property
    def degree(self) -> int:
        return max((i + j for i, j, _ in self.terms), default=0)

    def coeffs(self) -> np.ndarray:
        d = self.degree
        out = np.zeros((d + 1, d + 1))
        for i, j, c in self.terms:
            out[i, j] = c
        return out

    # Evaluation works for floats and for numpy arrays alike.
    def value(self, x1, x2):
        total = 0.0
        for i, j, c in self.terms:
            total = total + c * x1**i * x2**j
        return total

    def gradient(self, x1, x2):
        g1 = 0.0
        g2 = 0.0
        for i, j, c in self.terms:
            if i:
                g1 = g1 + c * i * x1 ** (i - 1) * x2**j
            if j:
                g2 = g2 + c * j * x1**i * x2 ** (j - 1)
        return g1, g2

    def hessian(self, x1, x2):
        h11 = 0.0
        h12 = 0.0
        h22 = 0.0
        for i, j, c in self.terms:
            if i > 1:
                h11 = h11 + c * i * (i - 1) * x1 ** (i - 2) * x2**j
            if i and j:
                h12 = h12 + c * i * j * x1 ** (i - 1) * x2 ** (j - 1)
            if j > 1:
                h22 = h22 + c * j * (j - 1) * x1**i * x2 ** (j - 2)
        return h11, h12, h22


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]``."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate domain {self}")

    def contains(self, x, tol: float = 1e-12) -> bool:
        x1, x2 = x
        return (
            self.xmin - tol <= x1 <= self.xmax + tol
            and self.ymin - tol <= x2 <= self.ymax + tol
        )

    def signed_distance(self, x) -> float:
        """Negative inside, zero on the boundary, positive outside (sup-norm)."""
        x1, x2 = x
        return max(self.xmin - x1, x1 - self.xmax, self.ymin - x2, x2 - self.ymax)

    def corners(self) -> np.ndarray:
        return np.array(
            [
                [self.xmin, self.ymin],
                [self.xmax, self.ymin],
                [self.xmax, self.ymax],
                [self.xmin, self.ymax],
            ]
        )

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin


@dataclass(frozen=True)
class SemiconcaveFn:
    """``u = min_b f_b`` on ``domain`` with semiconcavity constant ``K``.

    ``L`` bounds the norm of the subdifferential of ``f = K|x|^2 - u`` on the
    domain.  Use :func:`make_fn` to derive both constants.
    """

    branches: tuple[Branch, ...]
    domain: Domain
    K: float
    L: float

    def __post_init__(self):
        if not self.branches:
            raise ValueError("need at least one branch")
        if self.K < 0 or self.L < 0:
            raise ValueError("K and L must be non-negative")


def make_fn(
    branches: Iterable[Branch | Iterable[Sequence[float]]],
    domain: Domain,
    grid_n: int = 64,
) -> SemiconcaveFn:
    bs = tuple(b if isinstance(b, Branch) else Branch(b) for b in branches)
    K, L = derive_constants(bs, domain, grid_n)
    return SemiconcaveFn(bs, domain, K, L)


def _check_in_domain(fn: SemiconcaveFn, x) -> tuple[float, float]:
    p = _as_point(x)
    if not fn.domain.contains(p):
        raise DomainError(f"point {p} outside domain {fn.domain}")
    return p


def branch_values(fn: SemiconcaveFn, x) -> list[float]:
    x1, x2 = _check_in_domain(fn, x)
    return [b.value(x1, x2) for b in fn.branches]


def eval_min(fn: SemiconcaveFn, x) -> float:
    """Value of ``u`` at ``x``."""
    return min(branch_values(fn, x))


def active_tolerance(value: float, tol_active: float = DEFAULT_TOL_ACTIVE) -> float:
    return tol_active * max(1.0, abs(value))


def active_set(fn: SemiconcaveFn, x, tol_active: float = DEFAULT_TOL_ACTIVE) -> list[int]:
    """Indices of branches within ``tol_active`` of the minimum at ``x``.

    The tolerance is scaled by ``max(1, |u(x)|)``.
    """
    if tol_active <= 0:
        raise ValueError("tol_active must be positive")
    vals = branch_values(fn, x)
    m = min(vals)
    tol = active_tolerance(m, tol_active)
    return [b for b, v in enumerate(vals) if v <= m + tol]


def _lambda_max(h11, h12, h22):
    mean = 0.5 * (h11 + h22)
    rad = np.sqrt((0.5 * (h11 - h22)) ** 2 + h12**2)
    return mean + rad


def derive_constants(
    branches: Sequence[Branch], domain: Domain, grid_n: int = 64
) -> tuple[float, float]:
    """Sampled semiconcavity constant ``K`` and Lipschitz bound ``L``.

    ``K`` is half the largest Hessian eigenvalue over the grid (clipped at
    zero), ``L`` the largest ``|2Kx - grad f_b(x)|``.  Both carry a 1.05
    safety factor.
    """
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    xs = np.linspace(domain.xmin, domain.xmax, grid_n)
    ys = np.linspace(domain.ymin, domain.ymax, grid_n)
    X1, X2 = np.meshgrid(xs, ys, indexing="ij")
    lam = 0.0
    for b in branches:
        h11, h12, h22 = (np.broadcast_to(h, X1.shape) for h in b.hessian(X1, X2))
        lm = _lambda_max(h11, h12, h22)
        if not np.all(np.isfinite(lm)):
            raise EvaluationError("non-finite Hessian")
        lam = max(lam, float(lm.max()))
    K = SAFETY * 0.5 * max(lam, 0.0)
    L = 0.0
    for b in branches:
        g1, g2 = (np.broadcast_to(g, X1.shape) for g in b.gradient(X1, X2))
        norm = np.hypot(2 * K * X1 - g1, 2 * K * X2 - g2)
        if not np.all(np.isfinite(norm)):
            raise EvaluationError("non-finite gradient")
        L = max(L, float(norm.max()))
    return K, SAFETY * L


def concavity_defect(fn: SemiconcaveFn, n_pairs: int = 500, seed: int = 0) -> float:
    """Largest violation of midpoint concavity of ``u - K|x|^2``.

    Returns ``max((g(a) + g(b)) / 2 - g((a + b) / 2))`` over random segment
    pairs; non-positive up to rounding when ``K`` is valid.
    """
    rng = np.random.default_rng(seed)
    d = fn.domain
    lo = np.array([d.xmin, d.ymin])
    hi = np.array([d.xmax, d.ymax])

    def g(p):
        return eval_min(fn, p) - fn.K * float(p @ p)

    worst = -math.inf
    for _ in range(n_pairs):
        a = rng.uniform(lo, hi)
        b = rng.uniform(lo, hi)
        worst = max(worst, 0.5 * (g(a) + g(b)) - g(0.5 * (a + b)))
    return worst


@dataclass(frozen=True)
class Frame:
    """Rigid frame ``A(x) = R (x - origin)`` with ``R`` a proper rotation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(2))
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        o = np.asarray(self.origin, dtype=float)
        if R.shape != (2, 2) or o.shape != (2,):
            raise ValueError("rotation must be 2x2 and origin a 2-vector")
        if not np.allclose(R @ R.T, np.eye(2), atol=1e-12) or np.linalg.det(R) < 0:
            raise ValueError("rotation must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "origin", o)

    @classmethod
    def aligning(cls, origin, q) -> "Frame":
        """Frame sending ``origin`` to (0, 0) and direction ``q`` to (1, 0)."""
        q = np.asarray(q, dtype=float)
        q = q / np.linalg.norm(q)
        R = np.array([[q[0], q[1]], [-q[1], q[0]]])
        return cls(R, np.asarray(origin, dtype=float))

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.origin) @ self.rotation.T

    def apply_vector(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.rotation.T

    def inverse_apply(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z @ self.rotation + self.origin

    def inverse(self) -> "Frame":
        # A^{-1}(z) = R^T z + o = R^T (z - (-R o))
        return Frame(self.rotation.T, -self.rotation @ self.origin)


def _polymul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i, j in zip(*np.nonzero(a)):
        out[i : i + b.shape[0], j : j + b.shape[1]] += a[i, j] * b
    return out


def _compose(branch: Branch, frame: Frame) -> Branch:
    """Coefficients of ``z -> branch(A^{-1} z)``."""
    Rt = frame.rotation.T
    o = frame.origin
    # x_k = Rt[k, 0] z1 + Rt[k, 1] z2 + o[k] as 2x2 coefficient matrices
    lin = []
    for k in range(2):
        m = np.zeros((2, 2))
        m[0, 0] = o[k]
        m[1, 0] = Rt[k, 0]
        m[0, 1] = Rt[k, 1]
        lin.append(m)
    d = branch.degree
    pows = [[np.ones((1, 1))], [np.ones((1, 1))]]
    for k in range(2):
        for _ in range(d):
            pows[k].append(_polymul(pows[k][-1], lin[k]))
    out = np.zeros((d + 1, d + 1))
    for i, j, c in branch.terms:
        prod = _polymul(pows[0][i], pows[1][j])
        out[: prod.shape[0], : prod.shape[1]] += c * prod
    return Branch.from_coeffs(out)


def transform(fn: SemiconcaveFn, frame: Frame, grid_n: int = 64) -> SemiconcaveFn:
    """``fn`` expressed in the coordinates of ``frame`` (``u o A^{-1}``).

    The new domain is the bounding rectangle of the image of the old one,
    and ``K``, ``L`` are derived again on it.
    """
    branches = tuple(_compose(b, frame) for b in fn.branches)
    img = frame.apply(fn.domain.corners())
    domain = Domain(img[:, 0].min(), img[:, 0].max(), img[:, 1].min(), img[:, 1].max())
    return make_fn(branches, domain, grid_n)
