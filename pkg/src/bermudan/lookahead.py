"""Look-ahead payoff functional, recursive stopping rules and regression labels.

Most functions work on value matrices ``F`` (discounted payoffs) and ``H``
(continuation estimates) of shape ``(n, k)`` whose columns are
consecutive time indices along each path.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np


class EstimateSequence:
    """Continuation-value candidates ``h_t`` indexed by time, with ``h_T = 0``."""

    def __init__(self, estimates: Mapping[int, Callable], horizon: int):
        self.estimates = dict(estimates)
        self.horizon = int(horizon)
        if any(not 0 <= t < self.horizon for t in self.estimates):
            raise ValueError(f"estimate times must lie in 0..{self.horizon - 1}")

    def __call__(self, t: int, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if t == self.horizon:
            return np.zeros(xs.shape[0])
        try:
            h = self.estimates[t]
        except KeyError:
            raise ValueError(f"no continuation estimate for time {t}") from None
        return np.asarray(h(xs), dtype=float)


def value_matrices(f, hs, states, t0: int):
    """Payoffs and estimates along path segments.

    ``states`` has shape ``(n, k, d)`` with column ``j`` at time ``t0 + j``.
    Returns ``F, H`` of shape ``(n, k)``.
    """
    states = np.asarray(states, dtype=float)
    n, k, _ = states.shape
    F = np.empty((n, k))
    H = np.empty((n, k))
    for j in range(k):
        F[:, j] = f.discounted(t0 + j, states[:, j])
        H[:, j] = hs(t0 + j, states[:, j])
    return F, H


def first_exercise(F, H) -> np.ndarray:
    """Column of the first ``F >= H`` per row, or ``-1`` when there is none."""
    hit = np.asarray(F) >= np.asarray(H)
    idx = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), idx, -1)


def theta_values(F, H) -> np.ndarray:
    """Payoff at the first column with ``F >= H``; otherwise ``H`` in the last column."""
    F = np.asarray(F, dtype=float)
    H = np.asarray(H, dtype=float)
    idx = first_exercise(F, H)
    rows = np.arange(F.shape[0])
    return np.where(idx >= 0, F[rows, np.maximum(idx, 0)], H[:, -1])


def theta(f, hs, segment, t: int) -> np.ndarray:
    """Look-ahead payoff over ``segment`` (states at times ``t..t+w``).

    Scans ``s = t..t+w`` and returns ``f_s(x_s)`` at the first ``s`` with
    ``f_s(x_s) >= h_s(x_s)``; if none occurs, returns ``h_{t+w}(x_{t+w})``.
    ``segment`` has shape ``(w+1, d)`` or ``(n, w+1, d)``.
    """
    seg = np.asarray(segment, dtype=float)
    single = seg.ndim == 2
    if single:
        seg = seg[None]
    if seg.shape[1] < 1:
        raise ValueError("segment must contain at least one state")
    if t + seg.shape[1] - 1 > hs.horizon:
        raise ValueError("segment extends past the estimate horizon")
    out = theta_values(*value_matrices(f, hs, seg, t))
    return out[0] if single else out


def stopping_columns(F, H) -> np.ndarray:
    """Stopping column of the rule ``tau``: first ``F >= H``, else the last column."""
    idx = first_exercise(F, H)
    return np.where(idx >= 0, idx, np.shape(F)[1] - 1)


def tau_stopping(f, hs, path, t: int):
    """Stopping time ``tau_t(h)`` on a path covering times ``t..T``.

    ``path`` has shape ``(T-t+1, d)`` or ``(n, T-t+1, d)``.
    """
    p = np.asarray(path, dtype=float)
    single = p.ndim == 2
    if single:
        p = p[None]
    if t + p.shape[1] - 1 != hs.horizon:
        raise ValueError(f"path must cover times {t}..{hs.horizon}, got {p.shape[1]} states")
    out = t + stopping_columns(*value_matrices(f, hs, p, t))
    return int(out[0]) if single else out


def build_labels(f, hs, fresh, t: int, w: int) -> np.ndarray:
    """Regression labels for time ``t`` with look-ahead window ``w``.

    ``fresh`` holds sub-paths restarted at time ``t`` (column 0 at ``t``);
    label ``i`` is the look-ahead payoff over columns ``1..w+1``.
    """
    fresh = np.asarray(fresh, dtype=float)
    if w < 0:
        raise ValueError("window must be nonnegative")
    if fresh.shape[1] < w + 2:
        raise ValueError(f"window {w} needs {w + 2} columns, fresh paths have {fresh.shape[1]}")
    return theta(f, hs, fresh[:, 1:w + 2], t + 1)
