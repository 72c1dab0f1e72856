"""Exact reference solutions: finite-state Markov chains and a binomial lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .lookahead import theta_values
from .rng import SeedPlan

PATHS = "paths"
FRESH = "fresh"


@dataclass
class FiniteChain:
    """Time-inhomogeneous Markov chain on ``S`` states embedded in ``R^d``.

    ``transitions[t]`` is the row-stochastic ``S x S`` matrix from time
    ``t`` to ``t + 1``.  The chain starts in state ``initial``.
    """

    states: np.ndarray
    transitions: np.ndarray
    initial: int = 0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        self.transitions = np.asarray(self.transitions, dtype=float)
        S = self.states.shape[0]
        if self.transitions.ndim != 3 or self.transitions.shape[1:] != (S, S):
            raise ValueError(f"transitions must have shape (T, {S}, {S})")
        if np.any(self.transitions < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if np.max(np.abs(self.transitions.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1")
        if not 0 <= self.initial < S:
            raise ValueError("initial state index out of range")
        if len({tuple(s) for s in self.states}) != S:
            raise ValueError("state vectors must be distinct")
        self._cum = np.cumsum(self.transitions, axis=2)

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def steps(self) -> int:
        return self.transitions.shape[0]

    @property
    def d(self) -> int:
        return self.states.shape[1]

    def state_index(self, xs) -> np.ndarray:
        """Index of the nearest state for each row of ``xs``."""
        xs = np.asarray(xs, dtype=float).reshape(-1, self.d)
        dist = ((xs[:, None, :] - self.states[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(dist, axis=1)

    def _walk(self, start_idx: np.ndarray, t: int, u: np.ndarray) -> np.ndarray:
        n, k = u.shape
        idx = np.empty((n, k + 1), dtype=np.int64)
        idx[:, 0] = start_idx
        for j in range(k):
            cum = self._cum[t + j][idx[:, j]]
            nxt = (u[:, j, None] >= cum).sum(axis=1)
            idx[:, j + 1] = np.minimum(nxt, self.n_states - 1)
        return idx

    def simulate_indices(self, n: int, seeds: SeedPlan, purpose: str = PATHS) -> np.ndarray:
        u = seeds.uniforms(purpose, 0, np.arange(n), self.steps)
        return self._walk(np.full(n, self.initial), 0, u)

    def simulate_paths(self, n: int, seeds: SeedPlan, purpose: str = PATHS) -> np.ndarray:
        return self.states[self.simulate_indices(n, seeds, purpose)]

    def simulate_fresh_subpaths(self, starts, t: int, end: int, seeds: SeedPlan,
                                paths=None) -> np.ndarray:
        starts = np.asarray(starts, dtype=float).reshape(-1, self.d)
        if not 0 <= t < end <= self.steps:
            raise ValueError(f"need 0 <= t < end <= {self.steps}, got t={t}, end={end}")
        idx = np.arange(len(starts)) if paths is None else np.asarray(paths)
        u = seeds.uniforms(FRESH, t, idx, end - t)
        out = self.states[self._walk(self.state_index(starts), t, u)]
        out[:, 0] = starts
        return out


class ChainFunction:
    """Function on chain states given by a table ``values[t, state]``."""

    def __init__(self, chain: FiniteChain, values):
        self.chain = chain
        self.values = np.asarray(values, dtype=float)

    def at(self, t: int):
        return lambda xs: self.values[t, self.chain.state_index(xs)]


class ChainReward(ChainFunction):
    """Discounted rewards ``f_t`` on chain states; usable wherever a payoff is."""

    def __init__(self, chain: FiniteChain, table):
        super().__init__(chain, table)
        if self.values.shape != (chain.steps + 1, chain.n_states):
            raise ValueError(f"reward table must have shape ({chain.steps + 1}, {chain.n_states})")
        if np.any(self.values < 0):
            raise ValueError("rewards must be nonnegative")

    @property
    def bound(self) -> float:
        return float(self.values.max())

    def discounted(self, t: int, xs) -> np.ndarray:
        return self.values[t, self.chain.state_index(xs)]


def dp_exact(chain: FiniteChain, rewards):
    """Exact continuation and value tables, each of shape ``(T + 1, S)``.

    ``q[T] = 0``, ``q[t] = P_t max(f[t+1], q[t+1])``, ``v = max(f, q)``.
    """
    f = rewards.values if isinstance(rewards, ChainFunction) else np.asarray(rewards, dtype=float)
    T, S = chain.steps, chain.n_states
    q = np.zeros((T + 1, S))
    for t in range(T - 1, -1, -1):
        q[t] = chain.transitions[t] @ np.maximum(f[t + 1], q[t + 1])
    return q, np.maximum(f, q)


def theta_representation_check(chain: FiniteChain, rewards, q, t: int, w: int,
                               budget: int = 10**6) -> np.ndarray:
    """``E[theta_{t+1:w}(f, q) | X_t = s]`` for every state ``s`` by full enumeration."""
    f = rewards.values if isinstance(rewards, ChainFunction) else np.asarray(rewards, dtype=float)
    q = np.asarray(q, dtype=float)
    T, S = chain.steps, chain.n_states
    if not (0 <= t <= T - 1 and 0 <= w <= T - t - 1):
        raise ValueError(f"need 0 <= w <= T-t-1, got t={t}, w={w}, T={T}")
    count = S ** (w + 1)
    if count * S > budget:
        raise ValueError(f"enumeration of {count} continuations exceeds the budget {budget}")
    seqs = np.indices((S,) * (w + 1)).reshape(w + 1, -1).T         # (count, w+1)
    prob = chain.transitions[t][:, seqs[:, 0]]                       # (S, count)
    for j in range(1, w + 1):
        prob = prob * chain.transitions[t + j][seqs[:, j - 1], seqs[:, j]][None, :]
    times = t + 1 + np.arange(w + 1)
    vals = theta_values(f[times, seqs], q[times, seqs])
    return prob @ vals


def random_chain(rng: np.random.Generator, S: int, T: int, d: int = 1):
    """Random chain with random nonnegative rewards, for test fixtures."""
    states = np.round(rng.uniform(-5, 5, size=(S, d)), 3)
    while len({tuple(s) for s in states}) < S:
        states = np.round(rng.uniform(-5, 5, size=(S, d)), 3)
    raw = rng.exponential(size=(T, S, S)) * (rng.uniform(size=(T, S, S)) < 0.7)
    raw[..., 0] += 1e-3
    trans = raw / raw.sum(axis=2, keepdims=True)
    rewards = np.round(rng.uniform(0, 3, size=(T + 1, S)), 3)
    return FiniteChain(states, trans, int(rng.integers(S))), rewards


def save_chain(path, chain: FiniteChain, rewards) -> None:
    """Write the plain-text fixture format.

    Line 1 is ``S T d``, then ``S`` state vectors, then ``T`` row-major
    ``S x S`` transition matrices (one row per line), then ``T + 1`` reward
    rows and finally ``initial <index>``.
    """
    S, T, d = chain.n_states, chain.steps, chain.d
    lines = [f"{S} {T} {d}"]
    lines += [" ".join(repr(float(v)) for v in s) for s in chain.states]
    for P in chain.transitions:
        lines += [" ".join(repr(float(v)) for v in row) for row in P]
    lines += [" ".join(repr(float(v)) for v in row) for row in np.asarray(rewards)]
    lines.append(f"initial {chain.initial}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_chain(path):
    """Read a fixture written by :func:`save_chain`; returns ``(chain, rewards)``."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    S, T, d = (int(v) for v in lines[0].split())
    initial = 0
    if lines[-1].startswith("initial"):
        initial = int(lines[-1].split()[1])
        lines = lines[:-1]
    body = lines[1:]
    want = S + T * S + T + 1
    if len(body) != want:
        raise ValueError(f"{path}: expected {want} data lines, found {len(body)}")
    rows = [np.array(ln.split(), dtype=float) for ln in body]
    states = np.array(rows[:S]).reshape(S, d)
    trans = np.array(rows[S:S + T * S]).reshape(T, S, S)
    rewards = np.array(rows[S + T * S:]).reshape(T + 1, S)
    return FiniteChain(states, trans, initial), rewards


def black_scholes_put(x0: float, strike: float, rate: float, vol: float, horizon: float) -> float:
    if vol <= 0:
        return max(strike * math.exp(-rate * horizon) - x0, 0.0)
    sd = vol * math.sqrt(horizon)
    d1 = (math.log(x0 / strike) + (rate + 0.5 * vol**2) * horizon) / sd
    d2 = d1 - sd
    return float(strike * math.exp(-rate * horizon) * norm.cdf(-d2) - x0 * norm.cdf(-d1))


def binomial_bermudan_put(x0: float, strike: float, rate: float, vol: float, horizon: float,
                          steps: int, lattice_steps: int, dates=None) -> float:
    """Cox-Ross-Rubinstein price of a put exercisable on a subset of ``steps`` dates.

    ``dates`` are indices in ``0..steps`` on the grid ``horizon * j / steps``
    (default ``1..steps``); ``lattice_steps`` must be a multiple of ``steps``.
    """
    if lattice_steps % steps:
        raise ValueError(f"lattice steps {lattice_steps} are not a multiple of {steps} exercise dates")
    dates = range(1, steps + 1) if dates is None else dates
    dates = sorted(set(int(j) for j in dates))
    if any(not 0 <= j <= steps for j in dates):
        raise ValueError(f"exercise dates must lie in 0..{steps}")
    N = lattice_steps
    dt = horizon / N
    u = math.exp(vol * math.sqrt(dt))
    dn = 1.0 / u
    growth = math.exp(rate * dt)
    p = (growth - dn) / (u - dn)
    if not 0.0 <= p <= 1.0:
        raise ValueError("lattice too coarse for these parameters (risk-neutral probability outside [0, 1])")
    disc = 1.0 / growth
    stride = N // steps
    exercise_nodes = {j * stride for j in dates}

    def prices(i):
        return x0 * u ** (2.0 * np.arange(i + 1) - i)

    value = np.maximum(strike - prices(N), 0.0) if N in exercise_nodes else np.zeros(N + 1)
    for i in range(N - 1, -1, -1):
        value = disc * (p * value[1:] + (1.0 - p) * value[:-1])
        if i in exercise_nodes:
            value = np.maximum(value, strike - prices(i))
    return float(value[0])


def converged_bermudan_put(x0, strike, rate, vol, horizon, steps, dates=None,
                           lattice_steps=None, tol: float = 1e-3, max_doublings: int = 6):
    """Lattice price with ``N`` doubled until ``|P(N) - P(2N)| < tol``.

    Starts from ``N = 120 * steps``.  Returns ``(price at 2N, 2N, |P(N) - P(2N)|)``.
    """
    N = lattice_steps or 120 * steps
    prev = binomial_bermudan_put(x0, strike, rate, vol, horizon, steps, N, dates)
    for _ in range(max_doublings):
        cur = binomial_bermudan_put(x0, strike, rate, vol, horizon, steps, 2 * N, dates)
        diff = abs(cur - prev)
        N *= 2
        if diff < tol:
            break
        prev = cur
    return cur, N, diff
