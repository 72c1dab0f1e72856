"""Dynamic look-ahead least-squares Monte Carlo.

Backward induction over ``t = T-1, ..., 0``.  At every step each training
path is restarted from its time-``t`` state to produce conditionally
independent look-ahead labels; spline coefficients are fitted on the
learning sample, the spline parameters are chosen on the testing sample
and the look-ahead window on the validation sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lookahead import EstimateSequence, theta_values, value_matrices
from .regress import fit_least_squares
from .rng import SeedPlan
from .spline import SplineParams, SplineSpace

logger = logging.getLogger(__name__)

FULL = "T-t-1"


class NumericalError(RuntimeError):
    """A fit produced a non-finite intermediate."""


@dataclass(frozen=True)
class SplitPlan:
    """Learning, testing and validation sample sizes (in that index order)."""

    n_l: int
    n_t: int
    n_v: int

    def __post_init__(self):
        if min(self.n_l, self.n_t, self.n_v) < 1:
            raise ValueError(f"all split sizes must be >= 1, got {self}")

    @classmethod
    def thirds(cls, n: int) -> "SplitPlan":
        """``n_t = n_v = floor(n / 3)``, the rest for learning."""
        k = n // 3
        return cls(n - 2 * k, k, k)

    @property
    def n(self) -> int:
        return self.n_l + self.n_t + self.n_v

    @property
    def learning(self) -> slice:
        return slice(0, self.n_l)

    @property
    def testing(self) -> slice:
        return slice(self.n_l, self.n_l + self.n_t)

    @property
    def validation(self) -> slice:
        return slice(self.n_l + self.n_t, self.n)


class WindowGrid:
    """Candidate look-ahead windows.

    Entries are nonnegative ints or ``"T-t-1"`` (the full remaining
    horizon).  At time ``t`` each entry is capped at ``T - t - 1`` and
    duplicates are dropped.
    """

    def __init__(self, entries: Sequence):
        parsed = []
        for e in entries:
            if isinstance(e, str):
                if e.replace(" ", "") != FULL:
                    raise ValueError(f"unknown window entry {e!r}")
                parsed.append(FULL)
            else:
                if int(e) != e or e < 0:
                    raise ValueError(f"window must be a nonnegative integer, got {e!r}")
                parsed.append(int(e))
        if not parsed:
            raise ValueError("window grid is empty")
        self.entries = tuple(parsed)

    def __repr__(self):
        return f"WindowGrid({list(self.entries)!r})"

    def w_max(self, t: int, horizon: int) -> int:
        cap = horizon - t - 1
        if FULL in self.entries:
            return cap
        return min(max(self.entries), cap)

    def candidates(self, t: int, horizon: int) -> list[int]:
        cap = horizon - t - 1
        return sorted({cap if e == FULL else min(e, cap) for e in self.entries})


@dataclass
class StoppingPolicy:
    """Continuation estimates for ``t = 0..T-1``; ``q_T = 0`` by convention."""

    estimates: dict
    horizon: int
    algorithm: str = "ekt"
    windows: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def sequence(self) -> EstimateSequence:
        return EstimateSequence(self.estimates, self.horizon)

    def continuation(self, t: int, xs) -> np.ndarray:
        return self.sequence()(t, xs)


def select_parameter(candidates: Sequence, xs, ys):
    """Pick the candidate with the smallest empirical risk on ``(xs, ys)``.

    ``candidates`` is a sequence of ``(params, estimate)`` pairs.  Ties go
    to the smallest params (degree first, then knot distance).  Returns
    ``(params, estimate, risks)`` with ``risks`` aligned to ``candidates``.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    ys = np.asarray(ys, dtype=float)
    risks = np.array([np.mean((est(xs) - ys) ** 2) for _, est in candidates])
    best = min(range(len(candidates)), key=lambda j: (risks[j], candidates[j][0]))
    return candidates[best][0], candidates[best][1], risks


def select_window(candidates: dict, f, later: EstimateSequence, fresh, t: int):
    """Pick the window whose time-``t`` estimate maximises the validation lower bound.

    ``fresh`` holds validation sub-paths over times ``t..T``.  For window
    ``w`` the rule stops at the first ``s >= t`` with ``f_s >= h_s`` using
    ``h_t = candidates[w]`` and the finalised estimates of ``later`` for
    ``s > t``.  Ties go to the smallest window.  Returns ``(w, averages)``.
    """
    fresh = np.asarray(fresh, dtype=float)
    if t + fresh.shape[1] - 1 != later.horizon:
        raise ValueError("validation paths must reach maturity")
    if not candidates:
        raise ValueError("no window candidates")
    x_t = fresh[:, 0]
    f_t = f.discounted(t, x_t)
    if fresh.shape[1] > 1:
        continuation = theta_values(*value_matrices(f, later, fresh[:, 1:], t + 1))
    else:
        continuation = np.zeros(len(fresh))
    averages = {}
    for w in sorted(candidates):
        q = candidates[w](x_t)
        averages[w] = float(np.mean(np.where(f_t >= q, f_t, continuation)))
    best = max(sorted(averages), key=lambda w: (averages[w], -w))
    return best, averages


def fit_policy(model, f, split: SplitPlan, grid: Sequence[SplineParams], windows: WindowGrid,
               bound: float, seeds: SeedPlan, trunc_level: float | None = None) -> StoppingPolicy:
    """Fit the dynamic look-ahead stopping policy.

    ``model`` provides ``steps``, ``d``, ``simulate_paths(n, seeds)`` and
    ``simulate_fresh_subpaths(starts, t, end, seeds, paths)``.  ``bound``
    is the spline domain bound ``A``; estimates are truncated at
    ``trunc_level``, by default the payoff bound.
    """
    horizon = model.steps
    level = f.bound if trunc_level is None else float(trunc_level)
    grid = sorted(set(grid))
    if not grid:
        raise ValueError("parameter grid is empty")
    spaces = [SplineSpace(p, model.d, bound) for p in grid]
    X = model.simulate_paths(split.n, seeds)
    idx = np.arange(split.n)
    lt = idx[: split.n_l + split.n_t]
    val = idx[split.validation]
    policy = StoppingPolicy({}, horizon, "ekt")

    for t in range(horizon - 1, -1, -1):
        later = policy.sequence()
        cands = windows.candidates(t, horizon)
        end = t + windows.w_max(t, horizon) + 1
        fresh = model.simulate_fresh_subpaths(X[lt, t], t, end, seeds, paths=lt)
        F, H = value_matrices(f, later, fresh[:, 1:], t + 1)
        labels = np.column_stack([theta_values(F[:, : w + 1], H[:, : w + 1]) for w in cands])
        if not np.all(np.isfinite(labels)):
            raise NumericalError(f"non-finite labels at t={t}")
        x_learn, y_learn = X[split.learning, t], labels[: split.n_l]
        x_test, y_test = X[split.testing, t], labels[split.n_l:]

        fitted = []
        for p, space in zip(grid, spaces):
            ests = fit_least_squares(space, x_learn, y_learn, level)
            for w, est in zip(cands, ests):
                if not np.all(np.isfinite(est.coeffs)):
                    raise NumericalError(f"non-finite coefficients at t={t}, w={w}, p={p}")
            fitted.append(ests)

        chosen, risks = {}, {}
        for j, w in enumerate(cands):
            p, est, r = select_parameter([(p, ests[j]) for p, ests in zip(grid, fitted)],
                                         x_test, y_test[:, j])
            chosen[w] = (p, est)
            risks[w] = r

        val_fresh = model.simulate_fresh_subpaths(X[val, t], t, horizon, seeds, paths=val)
        w_hat, averages = select_window({w: pe[1] for w, pe in chosen.items()}, f, later,
                                        val_fresh, t)
        p_hat, est_hat = chosen[w_hat]
        policy.estimates[t] = est_hat
        policy.windows[t] = w_hat
        policy.params[t] = p_hat
        policy.diagnostics[t] = {"risks": risks, "validation": averages,
                                 "chosen_params": {w: pe[0] for w, pe in chosen.items()}}
        logger.debug("t=%d w=%d M=%d alpha=%g", t, w_hat, p_hat.degree, p_hat.alpha)
    return policy


def lower_bound_price(policy: StoppingPolicy, f, paths, return_times: bool = False):
    """Monte Carlo lower bound under the policy's rule on independent paths.

    Exercises at the first ``s >= 1`` with ``f_s >= q_s`` (always at
    maturity).  Returns ``(price, standard_error)`` and optionally the
    stopping times.
    """
    paths = np.asarray(paths, dtype=float)
    n, k, _ = paths.shape
    horizon = policy.horizon
    if k != horizon + 1:
        raise ValueError(f"paths must cover 0..{horizon}")
    seq = policy.sequence()
    payoff = np.zeros(n)
    times = np.full(n, horizon)
    alive = np.arange(n)
    for s in range(1, horizon + 1):
        xs = paths[alive, s]
        fs = f.discounted(s, xs)
        stop = fs >= seq(s, xs) if s < horizon else np.ones(alive.size, dtype=bool)
        payoff[alive[stop]] = fs[stop]
        times[alive[stop]] = s
        alive = alive[~stop]
        if alive.size == 0:
            break
    price = float(payoff.mean())
    se = float(payoff.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return (price, se, times) if return_times else (price, se)


def point_price(policy: StoppingPolicy, f, x0) -> float:
    """``max(f_0(x0), q_0(x0))``."""
    x = np.atleast_2d(np.asarray(x0, dtype=float))
    return float(max(f.discounted(0, x)[0], policy.continuation(0, x)[0]))
