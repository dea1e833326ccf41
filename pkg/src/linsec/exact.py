"""Independent evaluators: exact value iteration, exact policy evaluation,
full-tree truncated policy values, and their Monte Carlo cross-check.

These are the reference answers the approximate solvers are checked against.
They live in the library (not the test tree) so the CLI's `verify` command can
run them on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .attacker import AttackerMdp, AttackerState
from .game import GameConfig, sample_next_index
from .iql import IqlParams, QTable, boltzmann, new_table, sample_action
from .network import InfluenceNetwork

TRANSITION_TOL = 1e-12
MAX_TREE_HORIZON = 6


@dataclass(frozen=True)
class FiniteMdp:
    """Dense finite MDP: rewards (S, A), transitions (S, A, S), discount."""

    rewards: np.ndarray
    transitions: np.ndarray
    discount: float

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=float)
        p = np.asarray(self.transitions, dtype=float)
        if r.ndim != 2 or p.shape != (*r.shape, r.shape[0]):
            raise ValueError(f"shape mismatch: rewards {r.shape}, transitions {p.shape}")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        rowsums = p.sum(axis=2)
        if np.abs(rowsums - 1.0).max() > TRANSITION_TOL:
            s, a = np.unravel_index(np.abs(rowsums - 1.0).argmax(), rowsums.shape)
            raise ValueError(f"transition row (s={s}, a={a}) sums to {rowsums[s, a]}")
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "transitions", p)

    @property
    def n_states(self) -> int:
        return self.rewards.shape[0]


def exact_vi(mdp: FiniteMdp, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """Value iteration to a Bellman residual of at most tol.

    Stops once the sup-norm step falls below tol * (1 - gamma) / gamma; returns
    the value vector and the greedy policy.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    gamma = mdp.discount
    threshold = tol * (1.0 - gamma) / gamma
    v = np.zeros(mdp.n_states)
    while True:
        q = mdp.rewards + gamma * mdp.transitions @ v
        v_next = q.max(axis=1)
        if np.abs(v_next - v).max() < threshold:
            return v_next, q.argmax(axis=1)
        v = v_next


def q_from_values(mdp: FiniteMdp, v: np.ndarray) -> np.ndarray:
    """State-action values induced by a state-value vector."""
    return mdp.rewards + mdp.discount * mdp.transitions @ v


def policy_value(mdp: FiniteMdp, policy: np.ndarray) -> np.ndarray:
    """Exact evaluation of a deterministic stationary policy (linear solve)."""
    idx = np.arange(mdp.n_states)
    p_pi = mdp.transitions[idx, policy]
    r_pi = mdp.rewards[idx, policy]
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * p_pi, r_pi)


def bellman_residual(mdp: FiniteMdp, v: np.ndarray) -> float:
    return float(np.abs(q_from_values(mdp, v).max(axis=1) - v).max())


def two_state_chain() -> FiniteMdp:
    """Canonical sanity MDP with a hand-solvable optimum.

    States {0, 1}; action 0 stays put, action 1 moves to the other state with
    probability 0.9 (else stays). Rewards: r(0, stay)=0, r(0, move)=1,
    r(1, stay)=2, r(1, move)=0; discount 0.95. Optimal: move at 0, stay at 1,
    v*(1) = 2 / 0.05 = 40 and v*(0) = (1 + 0.855 * 40) / 0.905 = 7040 / 181.
    """
    rewards = np.array([[0.0, 1.0], [2.0, 0.0]])
    transitions = np.array(
        [
            [[1.0, 0.0], [0.1, 0.9]],
            [[0.0, 1.0], [0.9, 0.1]],
        ]
    )
    return FiniteMdp(rewards=rewards, transitions=transitions, discount=0.95)


def static_defender_mdp(
    net: InfluenceNetwork,
    cfg: GameConfig,
    q_fixed: QTable,
    tau: float,
    mdp: Optional[AttackerMdp] = None,
) -> FiniteMdp:
    """The finite attacker MDP induced by a frozen defender playing softmax of q_fixed.

    This is the alpha = 0 reduction of the (state, Q-table) process: the table
    never moves, so the defender collapses into the kernel.
    """
    if mdp is None:
        mdp = AttackerMdp(net, cfg, IqlParams(alpha=0.0, gamma=cfg.gamma, tau=tau))
    kernel = mdp.kernel
    n_states, n_act = kernel.n_states, kernel.n_actions
    rewards = np.zeros((n_states, n_act))
    transitions = np.zeros((n_states, n_act, n_states))
    for s in range(n_states):
        br = boltzmann(np.asarray(q_fixed)[s], tau)
        for u in range(n_act):
            rewards[s, u] = br @ kernel.reward_u[s, u]
            for d in range(n_act):
                for sn, p in kernel.support(s, u, d):
                    transitions[s, u, sn] += br[d] * p
    return FiniteMdp(rewards=rewards, transitions=transitions, discount=cfg.gamma)


def exact_vi_static_defender(
    q_fixed: QTable,
    net: InfluenceNetwork,
    cfg: GameConfig,
    tau: float,
    tol: float = 1e-10,
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact per-state values and greedy policy against a frozen softmax defender."""
    return exact_vi(static_defender_mdp(net, cfg, q_fixed, tau), tol=tol)


def exact_policy_value(
    mdp: AttackerMdp,
    z0: AttackerState,
    policy: Callable[[AttackerState], int],
    horizon: int,
) -> float:
    """Exact H-step discounted attacker return by full tree expansion.

    Every branch carries its own exactly-updated defender table, so the
    support grows like (|D| * 4)^H; horizons above 6 are rejected.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    if horizon > MAX_TREE_HORIZON:
        raise ValueError(f"horizon {horizon} too large for full expansion (max {MAX_TREE_HORIZON})")

    gamma = mdp.cfg.gamma

    def value(z: AttackerState, h: int) -> float:
        if h == 0 or z.s.is_terminal:
            return 0.0
        u = policy(z)
        total = mdp.expected_reward(z, u)
        for z_next, p in mdp.next_state_support(z, u):
            if z_next.s.is_terminal:
                continue
            total += gamma * p * value(z_next, h - 1)
        return total

    return value(z0, horizon)


def mc_truncated_return(
    mdp: AttackerMdp,
    policy: Callable[[AttackerState], int],
    horizon: int,
    episodes: int,
    rng: np.random.Generator,
) -> Tuple[float, float]:
    """Sampled H-step discounted attacker return from a fresh zero defender table.

    The statistical twin of exact_policy_value: each episode simulates the live
    defender (softmax play plus Q-updates). Returns (mean, standard error).
    """
    kernel = mdp.kernel
    gamma = mdp.cfg.gamma
    tau = mdp.defender.tau
    states = kernel.states
    totals = np.empty(episodes)
    for e in range(episodes):
        q = new_table(mdp.n_states, mdp.n_actions)
        s = 0
        total = 0.0
        disc = 1.0
        for _ in range(horizon):
            if s == mdp.terminal:
                break
            u = policy(AttackerState(states[s], q))
            d = sample_action(boltzmann(q[s], tau), rng)
            s_next = sample_next_index(kernel, s, u, d, rng)
            total += disc * float(kernel.reward_u[s, u, d])
            q = mdp.defender_next_q(q, s, d, u, s_next)
            s = s_next
            disc *= gamma
        totals[e] = total
    mean = float(totals.mean())
    se = float(totals.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0
    return mean, se
