"""Least-squares continuation-value estimates over spline spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .spline import SplineSpace


def truncate(level: float, z):
    """Clip ``z`` to ``[-level, level]``."""
    if not level > 0:
        raise ValueError("truncation level must be positive")
    return np.clip(z, -level, level)


def min_norm_lstsq(design, ys) -> np.ndarray:
    """Minimum-norm least-squares solution of ``design @ c ~ ys``.

    ``design`` may be sparse.  Columns without any nonzero entry get a zero
    coefficient (which is what the minimum-norm solution assigns them);
    the remaining block is solved by a complete orthogonal factorisation
    with column pivoting (LAPACK ``gelsy``).  ``ys`` may hold several
    right-hand sides as columns.
    """
    ys = np.asarray(ys, dtype=float)
    n, dim = design.shape
    if n == 0:
        raise ValueError("cannot fit on an empty sample")
    if ys.shape[0] != n:
        raise ValueError(f"{n} design rows but {ys.shape[0]} labels")
    if not np.all(np.isfinite(ys)):
        raise ValueError("labels must be finite")
    if sp.issparse(design):
        design = design.tocsc()
        used = np.flatnonzero(design.getnnz(axis=0))
        block = design[:, used].toarray()
    else:
        design = np.asarray(design, dtype=float)
        used = np.flatnonzero(np.any(design != 0, axis=0))
        block = design[:, used]
    coeffs = np.zeros((dim,) + ys.shape[1:])
    if used.size:
        cond = np.finfo(float).eps * max(block.shape)
        sol, *_ = scipy.linalg.lstsq(block, ys, cond=cond, lapack_driver="gelsy",
                                     check_finite=False)
        coeffs[used] = sol
    return coeffs


@dataclass
class ContinuationEstimate:
    """Spline function ``sum_k coeffs[k] B_k`` truncated at ``trunc_level`` on evaluation."""

    space: SplineSpace
    coeffs: np.ndarray
    trunc_level: float = np.inf

    def raw(self, xs) -> np.ndarray:
        return self.space.basis_eval(xs) @ self.coeffs

    def from_design(self, design) -> np.ndarray:
        return np.clip(design @ self.coeffs, -self.trunc_level, self.trunc_level)

    def __call__(self, xs) -> np.ndarray:
        return self.from_design(self.space.basis_eval(xs))


def fit_least_squares(space: SplineSpace, xs, ys, trunc_level: float = np.inf,
                      design=None):
    """Least-squares fit of ``ys`` on ``xs`` over ``space``.

    With 2-D ``ys`` every column is fitted against the same design and a
    list of estimates is returned.
    """
    if design is None:
        design = space.basis_eval(xs)
    ys = np.asarray(ys, dtype=float)
    coeffs = min_norm_lstsq(design, ys)
    if ys.ndim == 1:
        return ContinuationEstimate(space, coeffs, trunc_level)
    return [ContinuationEstimate(space, coeffs[:, j].copy(), trunc_level)
            for j in range(ys.shape[1])]


def evaluate(est: ContinuationEstimate, x) -> np.ndarray:
    return est(x)


def empirical_risk(est, xs, ys) -> float:
    """Mean squared deviation of ``est(xs)`` from ``ys``; ``est`` is any callable."""
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        raise ValueError("empty sample")
    return float(np.mean((np.asarray(est(xs)) - ys) ** 2))
