"""Tensor-product B-spline spaces with equidistant knots ``u_k = k * alpha``.

A space is determined by degree ``M``, knot distance ``alpha``, dimension
``d`` and domain bound ``A``.  It is spanned by the tensor B-splines whose
support meets ``[-A, A]^d``.  Points are clamped into the domain before
evaluation, so fitted functions are defined on all of ``R^d``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True, order=True)
class SplineParams:
    degree: int
    alpha: float

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"degree must be a nonnegative integer, got {self.degree}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"knot distance must be positive, got {self.alpha}")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "alpha", float(self.alpha))


def parameter_grid(degrees, alphas) -> list[SplineParams]:
    """Cartesian product of degrees and knot distances, sorted, without duplicates."""
    grid = sorted({SplineParams(m, a) for m in degrees for a in alphas})
    if not grid:
        raise ValueError("parameter grid is empty")
    return grid


def default_parameter_grid(n: int) -> list[SplineParams]:
    """``M <= ceil(log n)`` and ``alpha = 2**k`` with ``|k| <= ceil(log n)``."""
    c = math.ceil(math.log(n))
    return parameter_grid(range(c + 1), [2.0**k for k in range(-c, c + 1)])


def bspline_univariate(degree: int, alpha: float, k: int, x):
    """B-spline ``B_{k,M}`` with support ``[u_k, u_{k+M+1}]``.

    Cox-de Boor recursion; degree 0 is the indicator of ``[u_k, u_{k+1})``.
    """
    x = np.asarray(x, dtype=float) / alpha

    def rec(j, m):
        if m == 0:
            return ((x >= j) & (x < j + 1)).astype(float)
        return ((x - j) * rec(j, m - 1) + (j + m + 1 - x) * rec(j + 1, m - 1)) / m

    return rec(k, degree)


def local_bspline_values(degree: int, s: np.ndarray) -> np.ndarray:
    """Values of the ``degree + 1`` B-splines that are nonzero on one cell.

    ``s`` is the position inside the cell scaled to ``[0, 1]``.  Column
    ``r`` belongs to the B-spline starting ``degree - r`` cells to the left.
    """
    s = np.asarray(s, dtype=float)
    vals = np.ones(s.shape + (1,))
    for q in range(1, degree + 1):
        new = np.zeros(s.shape + (q + 1,))
        for r in range(q + 1):
            if r >= 1:
                new[..., r] += (s + q - r) * vals[..., r - 1]
            if r <= q - 1:
                new[..., r] += (r + 1 - s) * vals[..., r]
        vals = new / q
    return vals


class SplineSpace:
    """Span of tensor B-splines of one degree and knot distance over ``[-A, A]^d``."""

    def __init__(self, params: SplineParams, d: int, bound: float):
        if d < 1:
            raise ValueError("dimension must be positive")
        if not bound > 0:
            raise ValueError("domain bound must be positive")
        self.params = params
        self.d = int(d)
        self.bound = float(bound)
        a = params.alpha
        # cells [u_j, u_{j+1}) with j in [lo, hi] cover [-A, A]
        self._lo = math.floor(-self.bound / a)
        self._hi = math.ceil(self.bound / a) - 1
        self._k_min = self._lo - params.degree
        self._per_dim = self._hi - self._lo + 1 + params.degree

    def __repr__(self):
        p = self.params
        return f"SplineSpace(M={p.degree}, alpha={p.alpha:g}, d={self.d}, A={self.bound:g})"

    @property
    def per_dim(self) -> int:
        return self._per_dim

    @property
    def dimension(self) -> int:
        return self._per_dim ** self.d

    @cached_property
    def active_indices(self) -> np.ndarray:
        """Multi-indices ``k``, one row per basis function, in column order."""
        ks = range(self._k_min, self._k_min + self._per_dim)
        return np.array(list(itertools.product(ks, repeat=self.d)), dtype=np.int64).reshape(-1, self.d)

    def clamp(self, xs) -> np.ndarray:
        return np.clip(np.asarray(xs, dtype=float), -self.bound, self.bound)

    def basis_eval(self, xs) -> sp.csr_matrix:
        """Sparse design matrix of shape ``(n, dimension)`` for points ``xs`` of shape ``(n, d)``.

        Each row holds at most ``(M + 1)**d`` nonzeros.
        """
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None] if self.d == 1 else xs[None, :]
        n = xs.shape[0]
        if xs.shape[1] != self.d:
            raise ValueError(f"points have dimension {xs.shape[1]}, expected {self.d}")
        m = self.params.degree
        z = self.clamp(xs) / self.params.alpha
        cell = np.clip(np.floor(z), self._lo, self._hi)
        local = local_bspline_values(m, z - cell)            # (n, d, m+1)
        first = (cell - self._lo).astype(np.int64)           # column of r = 0 per dim
        vals = np.ones((n, 1))
        cols = np.zeros((n, 1), dtype=np.int64)
        for j in range(self.d):
            vals = (vals[:, :, None] * local[:, j, None, :]).reshape(n, -1)
            cols = (cols[:, :, None] * self._per_dim
                    + first[:, j, None, None] + np.arange(m + 1)[None, None, :]).reshape(n, -1)
        rows = np.repeat(np.arange(n), vals.shape[1])
        design = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(n, self.dimension))
        design.eliminate_zeros()
        return design


def space_dimension(space: SplineSpace) -> int:
    return space.dimension


def basis_eval(space: SplineSpace, x) -> sp.csr_matrix:
    return space.basis_eval(x)
