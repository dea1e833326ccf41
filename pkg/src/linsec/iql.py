"""Tabular Q-learning with Boltzmann (softmax) action selection.

Used by the defender always, and by the baseline learning attacker. A Q-table
is a plain (n_states, n_actions) float array; updates are functional (the
input table is never mutated).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

QTable = np.ndarray

DIST_TOL = 1e-9


@dataclass(frozen=True)
class IqlParams:
    """Step size, discount, and exploration temperature.

    alpha = 0 (frozen learner) and alpha = 1 (full replacement) are allowed as
    degenerate step sizes; both appear in the solver reductions and tests.
    """

    alpha: float
    gamma: float
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def new_table(n_states: int, n_actions: int) -> QTable:
    """Fresh all-zero Q-table."""
    return np.zeros((n_states, n_actions))


def q_update(q: QTable, s: int, a: int, r: float, s_next: int, params: IqlParams) -> QTable:
    """One temporal-difference update; returns a new table differing only at (s, a)."""
    n_states, n_actions = q.shape
    if not (0 <= s < n_states and 0 <= s_next < n_states):
        raise IndexError(f"state index out of range: {s}, {s_next}")
    if not 0 <= a < n_actions:
        raise IndexError(f"action index out of range: {a}")
    out = q.copy()
    target = r + params.gamma * q[s_next].max()
    out[s, a] = (1.0 - params.alpha) * q[s, a] + params.alpha * target
    return out


def boltzmann(values: np.ndarray, tau: float) -> np.ndarray:
    """Softmax of values / tau along the last axis, max-shifted for stability.

    Every entry is strictly positive and each distribution sums to 1.
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    v = np.asarray(values, dtype=float) / tau
    v = v - v.max(axis=-1, keepdims=True)
    e = np.exp(v)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_policy(q: QTable, s: int, tau: float) -> np.ndarray:
    """Action distribution at state s: probabilities proportional to exp(q(s, a) / tau)."""
    return boltzmann(q[s], tau)


def sample_action(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability vector; deterministic under a fixed seed."""
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1 or dist.size == 0:
        raise ValueError(f"expected a probability vector, got shape {dist.shape}")
    if (dist < 0).any() or abs(dist.sum() - 1.0) > DIST_TOL:
        raise ValueError("distribution entries must be non-negative and sum to 1")
    r = rng.random()
    acc = 0.0
    for i, p in enumerate(dist):
        acc += p
        if r < acc:
            return i
    return int(dist.size - 1)
