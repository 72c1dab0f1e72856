"""Single-sample least-squares baselines with polynomial regression.

``ls`` regresses realised cash flows under the already fitted rule
(full look-ahead); ``tr`` regresses ``max(f_{t+1}, q_{t+1})`` at the next
state (zero look-ahead).  Both use one path set, no splitting, no fresh
sub-paths and no truncation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .policy import StoppingPolicy
from .regress import min_norm_lstsq
from .rng import SeedPlan


def monomial_exponents(d: int, degree: int) -> np.ndarray:
    """Exponent vectors of all monomials in ``d`` variables of total degree <= ``degree``."""
    exps = [e for e in itertools.product(range(degree + 1), repeat=d) if sum(e) <= degree]
    exps.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    return np.array(exps, dtype=np.int64).reshape(-1, d)


@dataclass
class PolynomialEstimate:
    exponents: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    coeffs: np.ndarray

    def design(self, xs) -> np.ndarray:
        z = (np.asarray(xs, dtype=float) - self.center) / self.scale
        return np.prod(z[:, None, :] ** self.exponents[None, :, :], axis=2)

    def __call__(self, xs) -> np.ndarray:
        return self.design(xs) @ self.coeffs


def fit_polynomial(xs, ys, degree: int) -> PolynomialEstimate:
    xs = np.asarray(xs, dtype=float)
    center = xs.mean(axis=0)
    scale = xs.std(axis=0)
    scale[scale == 0] = 1.0
    est = PolynomialEstimate(monomial_exponents(xs.shape[1], degree), center, scale, None)
    est.coeffs = min_norm_lstsq(est.design(xs), ys)
    return est


def _fit_baseline(model, f, n: int, poly_degree: int, seeds: SeedPlan, name: str):
    n_basis = len(monomial_exponents(model.d, poly_degree))
    if n < n_basis:
        raise ValueError(f"n={n} is smaller than the basis dimension {n_basis}")
    horizon = model.steps
    X = model.simulate_paths(n, seeds)
    policy = StoppingPolicy({}, horizon, name, diagnostics={"poly_degree": poly_degree})
    cash = f.discounted(horizon, X[:, horizon])
    for t in range(horizon - 1, -1, -1):
        if name == "tr":
            nxt = X[:, t + 1]
            labels = np.maximum(f.discounted(t + 1, nxt), policy.continuation(t + 1, nxt))
        else:
            labels = cash
        est = fit_polynomial(X[:, t], labels, poly_degree)
        policy.estimates[t] = est
        if name == "ls":
            f_t = f.discounted(t, X[:, t])
            cash = np.where(f_t >= est(X[:, t]), f_t, cash)
    return policy


def fit_baseline_ls(model, f, n: int, poly_degree: int, seeds: SeedPlan) -> StoppingPolicy:
    """Longstaff-Schwartz style fit: labels are realised payoffs under the later rule."""
    return _fit_baseline(model, f, n, poly_degree, seeds, "ls")


def fit_baseline_tr(model, f, n: int, poly_degree: int, seeds: SeedPlan) -> StoppingPolicy:
    """Tsitsiklis-Van Roy style fit: labels are ``max(f_{t+1}, q_{t+1})`` at the next state."""
    return _fit_baseline(model, f, n, poly_degree, seeds, "tr")
