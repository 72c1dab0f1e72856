"""Geometric Brownian motion sample paths on an equidistant time grid.

Paths are arrays of shape ``(n, steps + 1, d)``.  Sub-paths restarted at
time ``t`` have shape ``(n, end - t + 1, d)`` with column 0 at time ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import SeedPlan

PATHS = "paths"
FRESH = "fresh"


@dataclass(frozen=True)
class GbmParams:
    """Correlated geometric Brownian motion.

    Parameters
    ----------
    x0 : initial prices, length d
    rate : risk-free rate per year
    vols : volatilities per sqrt(year), length d
    corr : d x d correlation matrix (identity when omitted)
    steps : number of time steps m
    horizon : maturity in years
    """

    x0: tuple
    rate: float
    vols: tuple
    corr: tuple | None = None
    steps: int = 12
    horizon: float = 1.0
    _factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        vols = np.atleast_1d(np.asarray(self.vols, dtype=float))
        d = x0.size
        if vols.size == 1 and d > 1:
            vols = np.full(d, vols[0])
        object.__setattr__(self, "x0", tuple(x0.tolist()))
        object.__setattr__(self, "vols", tuple(vols.tolist()))
        if d < 1:
            raise ValueError("x0 must have at least one coordinate")
        if vols.size != d:
            raise ValueError(f"vols has length {vols.size}, expected {d}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))
        scalars = [self.rate, self.horizon]
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(vols)) and np.all(np.isfinite(scalars))):
            raise ValueError("GBM parameters must be finite")
        if np.any(x0 <= 0):
            raise ValueError("x0 must be positive componentwise")
        if np.any(vols < 0):
            raise ValueError("vols must be nonnegative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        corr = np.eye(d) if self.corr is None else np.asarray(self.corr, dtype=float)
        if corr.shape != (d, d):
            raise ValueError(f"corr must be {d}x{d}, got shape {corr.shape}")
        if not np.all(np.isfinite(corr)):
            raise ValueError("corr must be finite")
        object.__setattr__(self, "corr", tuple(map(tuple, corr.tolist())))
        object.__setattr__(self, "_factor", correlation_factor(corr))

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def _increments(self, z: np.ndarray) -> np.ndarray:
        # z: (n, k, d) iid normals -> log-increments
        vols = np.asarray(self.vols)
        w = z @ self._factor.T
        drift = (self.rate - 0.5 * vols**2) * self.dt
        return drift + vols * np.sqrt(self.dt) * w

    def simulate_paths(self, n: int, seeds: SeedPlan, purpose: str = PATHS) -> np.ndarray:
        return simulate_paths(self, n, seeds, purpose)

    def simulate_fresh_subpaths(self, starts, t: int, end: int, seeds: SeedPlan,
                                paths=None) -> np.ndarray:
        return simulate_fresh_subpaths(self, starts, t, end, seeds, paths)


def correlation_factor(corr: np.ndarray) -> np.ndarray:
    """Matrix ``F`` with ``F @ F.T == corr``.

    Lower-triangular Cholesky factor when ``corr`` is positive definite;
    for singular positive semidefinite input an eigen-decomposition based
    factor with rank-deficient columns is returned.
    """
    corr = np.asarray(corr, dtype=float)
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValueError("correlation matrix must have unit diagonal")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        pass
    lam, vec = np.linalg.eigh(corr)
    tol = 1e-10 * max(1.0, lam.max())
    if lam.min() < -tol:
        raise ValueError(
            f"correlation matrix is not positive semidefinite (smallest eigenvalue {lam.min():.3e})")
    return vec * np.sqrt(np.clip(lam, 0.0, None))


def _walk(params: GbmParams, starts: np.ndarray, z: np.ndarray) -> np.ndarray:
    log_inc = params._increments(z)
    logs = np.concatenate([np.zeros_like(log_inc[:, :1]), np.cumsum(log_inc, axis=1)], axis=1)
    out = starts[:, None, :] * np.exp(logs)
    out[:, 0, :] = starts
    return out


def simulate_paths(params: GbmParams, n: int, seeds: SeedPlan, purpose: str = PATHS) -> np.ndarray:
    """Simulate ``n`` independent paths over time indices ``0..steps``.

    Path ``i`` consumes stream ``(purpose, 0, i)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    m, d = params.steps, params.d
    z = seeds.normals(purpose, 0, np.arange(n), m * d).reshape(n, m, d)
    starts = np.broadcast_to(np.asarray(params.x0), (n, d)).copy()
    return _walk(params, starts, z)


def simulate_fresh_subpaths(params: GbmParams, starts, t: int, end: int, seeds: SeedPlan,
                            paths=None) -> np.ndarray:
    """Restart the process at time ``t`` from each state in ``starts``.

    The sub-path for row ``r`` uses stream ``(FRESH, t, paths[r])``
    (``paths`` defaults to ``0..len(starts)-1``), so draws are independent
    of every stream used at other times.  Column 0 of the result equals
    ``starts`` exactly.
    """
    starts = np.asarray(starts, dtype=float)
    if starts.ndim == 1:
        starts = starts[:, None] if params.d == 1 else starts[None, :]
    if starts.shape[1] != params.d:
        raise ValueError(f"start states have dimension {starts.shape[1]}, expected {params.d}")
    if not 0 <= t < end <= params.steps:
        raise ValueError(f"need 0 <= t < end <= {params.steps}, got t={t}, end={end}")
    n, d = starts.shape
    idx = np.arange(n) if paths is None else np.asarray(paths)
    if idx.shape != (n,):
        raise ValueError("one path index per start state is required")
    k = end - t
    z = seeds.normals(FRESH, t, idx, k * d).reshape(n, k, d)
    return _walk(params, starts, z)
