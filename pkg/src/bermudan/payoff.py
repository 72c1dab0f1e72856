"""Exercise payoffs with built-in discounting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("put", "strangle-spread", "basket-average-strangle-spread")


@dataclass(frozen=True)
class PayoffSpec:
    """Payoff contract.

    ``strikes`` is ``(K,)`` for a put and ``(K1, K2, K3, K4)`` for the
    strangle spreads.  The basket variant applies the strangle spread to
    the arithmetic mean of the state coordinates; the other kinds read
    coordinate 0.
    """

    kind: str
    strikes: tuple
    rate: float = 0.05
    horizon: float = 1.0
    steps: int = 12

    def __post_init__(self):
        object.__setattr__(self, "strikes", tuple(float(k) for k in np.atleast_1d(self.strikes)))
        if self.kind not in KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}; expected one of {KINDS}")
        want = 1 if self.kind == "put" else 4
        if len(self.strikes) != want:
            raise ValueError(f"{self.kind} needs {want} strike(s), got {len(self.strikes)}")
        if np.any(np.diff(self.strikes) <= 0):
            raise ValueError("strikes must be strictly increasing")
        if not np.all(np.isfinite(self.strikes + (self.rate, self.horizon))):
            raise ValueError("payoff parameters must be finite")
        if self.horizon <= 0 or self.steps < 1:
            raise ValueError("horizon and steps must be positive")
        if self.bound <= 0:
            raise ValueError("payoff bound must be positive")

    @property
    def bound(self) -> float:
        """Global bound L on the payoff; attained at some state."""
        k = self.strikes
        if self.kind == "put":
            return k[0]
        return max(k[1] - k[0], k[3] - k[2])

    def intrinsic(self, states) -> np.ndarray:
        """Undiscounted payoff; ``states`` has shape ``(..., d)``."""
        x = np.asarray(states, dtype=float)
        x = x.mean(axis=-1) if self.kind.startswith("basket") else x[..., 0]
        k = self.strikes
        if self.kind == "put":
            value = k[0] - x
        else:
            pos = np.maximum
            value = (pos(k[1] - x, 0.0) - pos(k[0] - x, 0.0)
                     + pos(x - k[2], 0.0) - pos(x - k[3], 0.0))
        # prices are nonnegative; the clip also absorbs rounding at the plateaus
        return np.clip(value, 0.0, self.bound)

    def discount(self, t: int) -> float:
        if not 0 <= t <= self.steps:
            raise ValueError(f"time index {t} outside 0..{self.steps}")
        return float(np.exp(-self.rate * self.horizon * t / self.steps))

    def discounted(self, t: int, states) -> np.ndarray:
        return self.discount(t) * self.intrinsic(states)


def intrinsic(spec: PayoffSpec, state) -> np.ndarray:
    return spec.intrinsic(state)


def discounted_payoff(spec: PayoffSpec, t: int, state) -> np.ndarray:
    """Payoff at time index ``t`` discounted to time 0 with continuous compounding."""
    return spec.discounted(t, state)


def payoff_bound(spec: PayoffSpec) -> float:
    return spec.bound
