"""Finite stochastic game over a linear influence network.

State enumeration, exact transition supports (success / reset / end / stay
branches), seeded sampling, and a dense kernel tabulation used by the
attacker-side solvers and the experiment harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .network import (
    InfluenceNetwork,
    NetworkState,
    attacker_reward,
    compromise_prob,
    defender_reward,
)

PROB_TOL = 1e-12


@dataclass(frozen=True)
class GameConfig:
    """Compromise, reset and end probabilities plus discounting and episode cap."""

    p_n0: float
    p_n1: float
    p_d0: float
    p_d1: float
    p_r: float
    p_e: float
    gamma: float = 0.95
    episode_cap: int = 500
    defender_reward_mode: str = "zero_sum"

    def __post_init__(self):
        if not 0.0 <= self.p_n1 <= self.p_n0 <= 1.0:
            raise ValueError(f"need 0 <= p_n1 <= p_n0 <= 1, got {self.p_n1}, {self.p_n0}")
        if not 0.0 <= self.p_d1 <= self.p_d0 <= 1.0:
            raise ValueError(f"need 0 <= p_d1 <= p_d0 <= 1, got {self.p_d1}, {self.p_d0}")
        if self.p_r < 0 or self.p_e < 0 or self.p_r + self.p_e > 1.0:
            raise ValueError(f"need p_r, p_e >= 0 and p_r + p_e <= 1, got {self.p_r}, {self.p_e}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.episode_cap < 1:
            raise ValueError(f"episode_cap must be positive, got {self.episode_cap}")
        if self.defender_reward_mode not in ("zero_sum", "zero"):
            raise ValueError(f"unknown defender_reward mode {self.defender_reward_mode!r}")


@dataclass(frozen=True)
class ActionSet:
    """Both players pick one of n assets or do nothing; no-op is the last index."""

    n: int

    @property
    def n_actions(self) -> int:
        return self.n + 1

    @property
    def noop(self) -> int:
        return self.n

    def is_attack(self, a: int) -> bool:
        return 0 <= a < self.n


# Support of one transition: list of (next state, probability), probabilities
# positive, distinct states, summing to 1.
TransitionSupport = List[Tuple[NetworkState, float]]


def enumerate_states(n: int) -> List[NetworkState]:
    """All 2^n compromise patterns by ascending bitmask, then the terminal state."""
    if n < 1:
        raise ValueError(f"asset count must be positive, got {n}")
    states = [NetworkState.from_mask(mask, n) for mask in range(2**n)]
    states.append(NetworkState.terminal())
    return states


def state_index(state: NetworkState, n: int) -> int:
    """Index into enumerate_states(n): bitmask for live states, 2^n for terminal."""
    if state.is_terminal:
        return 2**n
    return state.mask()


def transition_support(
    net: InfluenceNetwork, cfg: GameConfig, state: NetworkState, u: int, d: int
) -> TransitionSupport:
    """Exact next-state distribution for one joint action.

    A successful attack moves to the superset state. The remaining mass (failed
    attack or no-op) splits into game end, reset to the all-uncompromised
    state, and staying put. Coinciding next states are merged.
    """
    if state.is_terminal:
        return [(NetworkState.terminal(), 1.0)]
    acts = ActionSet(net.n)
    p = 0.0
    if acts.is_attack(u):
        p = compromise_prob(net, cfg, state, u, d, u)
    masses: list[tuple[NetworkState, float]] = []
    if p > 0.0:
        masses.append((state.with_compromised(u), p))
    m = 1.0 - p
    if m > 0.0:
        masses.append((NetworkState.terminal(), m * cfg.p_e))
        masses.append((NetworkState.initial(), m * cfg.p_r))
        masses.append((state, m * (1.0 - cfg.p_e - cfg.p_r)))
    merged: dict[NetworkState, float] = {}
    for nxt, prob in masses:
        if prob > 0.0:
            merged[nxt] = merged.get(nxt, 0.0) + prob
    return list(merged.items())


def sample_transition(
    net: InfluenceNetwork,
    cfg: GameConfig,
    state: NetworkState,
    u: int,
    d: int,
    rng: np.random.Generator,
) -> NetworkState:
    """Draw the next state by inverse CDF over transition_support."""
    support = transition_support(net, cfg, state, u, d)
    r = rng.random()
    acc = 0.0
    for nxt, prob in support:
        acc += prob
        if r < acc:
            return nxt
    return support[-1][0]


@dataclass(frozen=True)
class GameKernel:
    """Dense index-space tabulation of rewards and transition supports.

    States are indexed per enumerate_states; actions 0..n-1 attack/defend that
    asset, index n is no-op. `next_idx`/`next_p` are zero-padded along the last
    axis; `next_len` gives the true support size.
    """

    n: int
    n_states: int
    n_actions: int
    terminal: int
    reward_u: np.ndarray  # (S, U, D)
    reward_d: np.ndarray  # (S, U, D)
    next_idx: np.ndarray  # (S, U, D, K) int
    next_p: np.ndarray  # (S, U, D, K) float
    next_len: np.ndarray  # (S, U, D) int
    states: tuple = field(repr=False, default=())

    def support(self, s: int, u: int, d: int) -> list[tuple[int, float]]:
        k = self.next_len[s, u, d]
        return list(zip(self.next_idx[s, u, d, :k].tolist(), self.next_p[s, u, d, :k].tolist()))


def build_kernel(net: InfluenceNetwork, cfg: GameConfig) -> GameKernel:
    """Tabulate the full (state, attack, defense) grid once for fast lookups."""
    states = enumerate_states(net.n)
    n_states = len(states)
    n_actions = net.n + 1
    reward_u = np.zeros((n_states, n_actions, n_actions))
    reward_d = np.zeros((n_states, n_actions, n_actions))
    max_k = 4
    next_idx = np.zeros((n_states, n_actions, n_actions, max_k), dtype=np.int64)
    next_p = np.zeros((n_states, n_actions, n_actions, max_k))
    next_len = np.zeros((n_states, n_actions, n_actions), dtype=np.int64)
    for s, state in enumerate(states):
        for u in range(n_actions):
            for d in range(n_actions):
                reward_u[s, u, d] = attacker_reward(net, cfg, state, u, d)
                reward_d[s, u, d] = defender_reward(net, cfg, state, u, d)
                support = transition_support(net, cfg, state, u, d)
                next_len[s, u, d] = len(support)
                for k, (nxt, prob) in enumerate(support):
                    next_idx[s, u, d, k] = state_index(nxt, net.n)
                    next_p[s, u, d, k] = prob
    for arr in (reward_u, reward_d, next_idx, next_p, next_len):
        arr.setflags(write=False)
    return GameKernel(
        n=net.n,
        n_states=n_states,
        n_actions=n_actions,
        terminal=state_index(NetworkState.terminal(), net.n),
        reward_u=reward_u,
        reward_d=reward_d,
        next_idx=next_idx,
        next_p=next_p,
        next_len=next_len,
        states=tuple(states),
    )


def sample_next_index(
    kernel: GameKernel, s: int, u: int, d: int, rng: np.random.Generator
) -> int:
    """Index-space twin of sample_transition, driven by the tabulated kernel."""
    k = kernel.next_len[s, u, d]
    r = rng.random()
    acc = 0.0
    for i in range(k):
        acc += kernel.next_p[s, u, d, i]
        if r < acc:
            return int(kernel.next_idx[s, u, d, i])
    return int(kernel.next_idx[s, u, d, k - 1])
