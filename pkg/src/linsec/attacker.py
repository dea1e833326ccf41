"""Omniscient attacker machinery.

The attacker knows the game, the defender's learning rule and parameters, and
observes joint actions, so it can fold the defender into the environment: the
resulting decision process has states z = (network state, defender Q-table).
This module builds that process, solves it by fitted value iteration with a
small neural value model, extracts a one-step lookahead policy, mirrors the
defender's table online, and computes the approximation-error diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .game import GameConfig, GameKernel, build_kernel, sample_next_index, state_index
from .iql import IqlParams, QTable, boltzmann, new_table, q_update, sample_action
from .mlp import MlpModel, MlpSpec, TrainConfig, init_model, train
from .network import InfluenceNetwork, NetworkState


@dataclass
class AttackerState:
    """Joint solver state: network state plus the defender's current Q-table."""

    s: NetworkState
    q: QTable


@dataclass(frozen=True)
class SamplerConfig:
    """How training states are drawn: per-entry Q box plus an optional share of
    states collected from simulated play instead of the uniform box."""

    q_low: float | np.ndarray
    q_high: float | np.ndarray
    n_samples: int
    trajectory_mix: float = 0.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0.0 <= self.trajectory_mix <= 1.0:
            raise ValueError(f"trajectory_mix must lie in [0, 1], got {self.trajectory_mix}")
        if np.any(np.asarray(self.q_low) > np.asarray(self.q_high)):
            raise ValueError("q_low must be <= q_high")


@dataclass(frozen=True)
class BoundInputs:
    """Ingredients of the one-step approximation error bound."""

    delta: float
    tau: float
    gamma: float
    d_count: int
    r_max: float

    def __post_init__(self):
        if self.delta < 0 or self.r_max < 0:
            raise ValueError("delta and r_max must be non-negative")
        if self.tau <= 0 or self.d_count < 1:
            raise ValueError("tau must be positive and d_count >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")


def value_spec(kind: str, n_states: int, n_actions: int) -> MlpSpec:
    """Model architectures compared in the experiments: `cm` is the three-hidden-layer
    network, `sm` the bare affine map."""
    hidden = {"cm": (64, 64, 32), "sm": ()}.get(kind.lower())
    if hidden is None:
        raise ValueError(f"unknown value model kind {kind!r} (expected 'cm' or 'sm')")
    return MlpSpec(input_dim=n_states * n_actions, hidden_dims=hidden, output_dim=n_states)


ForwardFn = Callable[[np.ndarray], np.ndarray]


def _make_forward(model: MlpModel, dtype=np.float64) -> ForwardFn:
    """Closure evaluating the model on a (B, input_dim) batch in the given dtype."""
    weights = [w.astype(dtype) for w in model.weights]
    biases = [b.astype(dtype) for b in model.biases]
    shift = model.input_shift.astype(dtype)
    inv_scale = (1.0 / model.input_scale).astype(dtype)
    last = len(weights) - 1
    def fwd(x: np.ndarray) -> np.ndarray:
        h = (x - shift) * inv_scale
        for layer, (w, b) in enumerate(zip(weights, biases)):
            h = h @ w + b
            if layer < last:
                np.maximum(h, 0.0, out=h)
        return h
    return fwd


class AttackerMdp:
    """Decision process over (network state, defender Q-table).

    Wraps a tabulated game kernel together with the defender's learning
    parameters; all solver operations (expected rewards, successor supports,
    backups, lookahead action choice) live here.
    """

    def __init__(self, net: InfluenceNetwork, cfg: GameConfig, defender: IqlParams):
        self.net = net
        self.cfg = cfg
        self.defender = defender
        self.kernel: GameKernel = build_kernel(net, cfg)
        self.n_states = self.kernel.n_states
        self.n_actions = self.kernel.n_actions
        self.terminal = self.kernel.terminal
        self.input_dim = self.n_states * self.n_actions

    # -- scalars ---------------------------------------------------------

    def r_max(self) -> float:
        """max |r_u| over the full (state, attack, defense) grid."""
        return float(np.abs(self.kernel.reward_u).max())

    def default_q_box(self) -> tuple[float, float]:
        """Per-entry bounds containing every defender Q iterate from zero init."""
        r_lo = float(self.kernel.reward_d.min())
        r_hi = float(self.kernel.reward_d.max())
        denom = 1.0 - self.defender.gamma
        return min(0.0, r_lo) / denom, max(0.0, r_hi) / denom

    # -- single-state operations ------------------------------------------

    def _index(self, s: NetworkState | int) -> int:
        if isinstance(s, NetworkState):
            return state_index(s, self.kernel.n)
        return int(s)

    def expected_reward(self, z: AttackerState, u: int) -> float:
        """Stage reward against the defender's softmax play: E_{d~BR(q(s,.))} r_u(s,u,d)."""
        if z.s.is_terminal:
            return 0.0
        s = self._index(z.s)
        br = boltzmann(z.q[s], self.defender.tau)
        return float(br @ self.kernel.reward_u[s, u])

    def defender_next_q(self, q: QTable, s: int, d: int, u: int, s_next: int) -> QTable:
        """The defender's table after it observes (s, d, reward, s_next)."""
        r_d = float(self.kernel.reward_d[s, u, d])
        return q_update(q, s, d, r_d, s_next, self.defender)

    def track_defender(self, q: QTable, s: int, d: int, u: int, s_next: int) -> QTable:
        """Online mirror of the defender's update; stays bit-exact with the live table."""
        return self.defender_next_q(q, s, d, u, s_next)

    def next_state_support(self, z: AttackerState, u: int) -> List[Tuple[AttackerState, float]]:
        """Successor distribution over (next network state, updated defender table).

        One branch per defender action and kernel outcome; distinct branches
        generally carry distinct tables and are not merged.
        """
        if z.s.is_terminal:
            return [(AttackerState(z.s, z.q.copy()), 1.0)]
        s = self._index(z.s)
        br = boltzmann(z.q[s], self.defender.tau)
        out: List[Tuple[AttackerState, float]] = []
        states = self.kernel.states
        for d in range(self.n_actions):
            for sn, p in self.kernel.support(s, u, d):
                q2 = self.defender_next_q(z.q, s, d, u, sn)
                out.append((AttackerState(states[sn], q2), float(br[d]) * p))
        return out

    def bellman_backup(self, z: AttackerState, model: Optional[MlpModel]) -> float:
        """One Bellman application at z under the model's values (terminal pinned to 0).

        `model=None` stands for the all-zero value function.
        """
        return float(self.action_values(z, model).max())

    def action_values(self, z: AttackerState, model: Optional[MlpModel]) -> np.ndarray:
        """The bracketed backup term for every attacker action at z."""
        fwd = None if model is None else _make_forward(model)
        s = self._index(z.s)
        return self._backup_values(s, z.q[None, :, :], fwd)[0]

    def act(self, z: AttackerState, model: Optional[MlpModel]) -> int:
        """Greedy one-step lookahead on the learned values; ties go to the lowest index."""
        return int(np.argmax(self.action_values(z, model)))

    def _act_index(self, s: int, q: QTable, fwd: Optional[ForwardFn]) -> int:
        return int(np.argmax(self._backup_values(s, q[None, :, :], fwd)[0]))

    # -- batched backup ----------------------------------------------------

    def _backup_values(self, s: int, q3: np.ndarray, fwd: Optional[ForwardFn]) -> np.ndarray:
        """Backup bracket for a batch of tables at one network state.

        q3 has shape (B, n_states, n_actions); returns (B, n_actions) with one
        column per attacker action. Terminal successors contribute value 0, so
        their forward passes are skipped entirely.
        """
        kernel = self.kernel
        n_act, term = self.n_actions, self.terminal
        batch = q3.shape[0]
        vals = np.empty((batch, n_act))
        if s == term:
            vals[:] = 0.0
            return vals
        br = boltzmann(q3[:, s, :], self.defender.tau)
        if fwd is None:
            for u in range(n_act):
                vals[:, u] = br @ kernel.reward_u[s, u]
            return vals

        gamma_att = self.cfg.gamma
        alpha, gamma_def = self.defender.alpha, self.defender.gamma
        maxq = q3.max(axis=2)  # (B, S)

        if alpha == 0.0:
            # frozen defender: every successor keeps the same table
            v_all = fwd(np.ascontiguousarray(q3.reshape(batch, self.input_dim)))
            for u in range(n_act):
                cont = np.zeros(batch)
                for d in range(n_act):
                    k = kernel.next_len[s, u, d]
                    acc = np.zeros(batch)
                    for t in range(k):
                        sn = int(kernel.next_idx[s, u, d, t])
                        if sn == term:
                            continue
                        acc += kernel.next_p[s, u, d, t] * v_all[:, sn]
                    cont += br[:, d] * acc
                vals[:, u] = br @ kernel.reward_u[s, u] + gamma_att * cont
            return vals

        # private scratch copy: the column writes below must not leak into q3
        flat = np.array(q3.reshape(batch, self.input_dim))
        for u in range(n_act):
            cont = np.zeros(batch)
            for d in range(n_act):
                col = s * n_act + d
                orig = flat[:, col].copy()
                base = (1.0 - alpha) * orig
                r_d = kernel.reward_d[s, u, d]
                acc = np.zeros(batch)
                for t in range(kernel.next_len[s, u, d]):
                    sn = int(kernel.next_idx[s, u, d, t])
                    if sn == term:
                        continue
                    flat[:, col] = base + alpha * (r_d + gamma_def * maxq[:, sn])
                    acc += kernel.next_p[s, u, d, t] * fwd(flat)[:, sn]
                flat[:, col] = orig
                cont += br[:, d] * acc
            vals[:, u] = br @ kernel.reward_u[s, u] + gamma_att * cont
        return vals

    def backup_targets(
        self,
        s_idx: np.ndarray,
        q3: np.ndarray,
        model: Optional[MlpModel],
        dtype=np.float32,
        chunk: int = 8192,
    ) -> np.ndarray:
        """Bellman targets for a sampled batch, grouped by network state.

        Successor forward passes run in `dtype` (float32 by default: the cast
        error is orders of magnitude below the regression tolerance).
        """
        fwd = None if model is None else _make_forward(model, dtype)
        out = np.empty(s_idx.shape[0])
        for s in np.unique(s_idx):
            sel = np.flatnonzero(s_idx == s)
            for start in range(0, sel.size, chunk):
                idx = sel[start : start + chunk]
                block = q3[idx].astype(dtype) if fwd is not None else q3[idx]
                out[idx] = self._backup_values(int(s), block, fwd).max(axis=1)
        return out

    # -- sampling ----------------------------------------------------------

    def _sample_batch(
        self,
        sampler: SamplerConfig,
        rng: np.random.Generator,
        model: Optional[MlpModel] = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        n_traj = int(round(sampler.trajectory_mix * sampler.n_samples))
        n_uniform = sampler.n_samples - n_traj
        parts_s = []
        parts_q = []
        if n_uniform:
            s_idx = rng.integers(0, self.terminal, size=n_uniform)
            low = np.broadcast_to(np.asarray(sampler.q_low, float), (self.n_states, self.n_actions))
            high = np.broadcast_to(np.asarray(sampler.q_high, float), (self.n_states, self.n_actions))
            q3 = rng.uniform(low, high, size=(n_uniform, self.n_states, self.n_actions))
            parts_s.append(s_idx)
            parts_q.append(q3)
        if n_traj:
            s_idx, q3 = self._trajectory_states(n_traj, rng, model)
            parts_s.append(s_idx)
            parts_q.append(q3)
        return np.concatenate(parts_s), np.concatenate(parts_q)

    def _trajectory_states(
        self, count: int, rng: np.random.Generator, model: Optional[MlpModel]
    ) -> tuple[np.ndarray, np.ndarray]:
        """States visited by simulated play: IQL defender vs the current lookahead attacker."""
        fwd = None if model is None else _make_forward(model)
        out_s = np.empty(count, dtype=np.int64)
        out_q = np.empty((count, self.n_states, self.n_actions))
        q = new_table(self.n_states, self.n_actions)
        s = 0
        steps_in_episode = 0
        for t in range(count):
            out_s[t] = s
            out_q[t] = q
            u = self._act_index(s, q, fwd)
            d = sample_action(boltzmann(q[s], self.defender.tau), rng)
            s_next = sample_next_index(self.kernel, s, u, d, rng)
            q = self.defender_next_q(q, s, d, u, s_next)
            s = s_next
            steps_in_episode += 1
            if s == self.terminal or steps_in_episode >= self.cfg.episode_cap:
                s = 0
                steps_in_episode = 0
        return out_s, out_q

    def sample_states(
        self,
        sampler: SamplerConfig,
        rng: np.random.Generator,
        model: Optional[MlpModel] = None,
    ) -> List[AttackerState]:
        """Draw solver states: uniform over the box, plus the configured share
        of simulated-play visits."""
        s_idx, q3 = self._sample_batch(sampler, rng, model)
        states = self.kernel.states
        return [AttackerState(states[int(s)], q3[i]) for i, s in enumerate(s_idx)]


def fitted_value_iteration(
    mdp: AttackerMdp,
    model_spec: MlpSpec,
    sampler: SamplerConfig,
    horizons: int,
    train_cfg: TrainConfig,
    seed: int = 0,
    dtype=np.float32,
) -> tuple[MlpModel, List[float]]:
    """Approximate value iteration: alternately back up sampled states and
    regress the model onto the targets.

    The value at horizon 0 is identically zero, so the first round regresses
    the myopic values. The same model instance is trained throughout (warm
    start); fresh optimizer moments each horizon. Deterministic for a fixed
    seed. Returns the model and the final train loss per horizon.
    """
    if horizons < 1:
        raise ValueError(f"horizons must be >= 1, got {horizons}")
    low = np.broadcast_to(np.asarray(sampler.q_low, float), (mdp.n_states, mdp.n_actions))
    high = np.broadcast_to(np.asarray(sampler.q_high, float), (mdp.n_states, mdp.n_actions))
    shift = ((low + high) / 2.0).ravel()
    half = ((high - low) / 2.0).ravel()
    scale = np.where(half > 0, half, 1.0)
    model = init_model(model_spec, np.random.default_rng(np.random.SeedSequence((seed, 0))), shift, scale)
    losses: List[float] = []
    for k in range(horizons):
        rng_sample = np.random.default_rng(np.random.SeedSequence((seed, 1, k)))
        current = model if k > 0 else None
        s_idx, q3 = mdp._sample_batch(sampler, rng_sample, current)
        targets = mdp.backup_targets(s_idx, q3, current, dtype=dtype)
        rng_train = np.random.default_rng(np.random.SeedSequence((seed, 2, k)))
        history = train(model, q3.reshape(s_idx.shape[0], -1), s_idx, targets, train_cfg, rng=rng_train)
        losses.append(history[-1])
    return model, losses


# -- error-bound diagnostics -----------------------------------------------


def epsilon_bound(b: BoundInputs) -> float:
    """One-step approximation error bound for a sampled state space of covering
    radius delta: delta * sqrt(|D|) / (tau * (1 - gamma)^3) * r_max."""
    return b.delta * np.sqrt(b.d_count) / (b.tau * (1.0 - b.gamma) ** 3) * b.r_max


def asymptotic_bound(epsilon: float, gamma: float) -> float:
    """Limiting distance from the optimal values: 2 * gamma / (1 - gamma)^2 * epsilon."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return 2.0 * gamma / (1.0 - gamma) ** 2 * epsilon


def estimate_covering_radius(
    samples: Sequence[np.ndarray] | np.ndarray,
    n_probes: int,
    rng: np.random.Generator,
    low: Optional[np.ndarray] = None,
    high: Optional[np.ndarray] = None,
    probe_chunk: int = 64,
) -> float:
    """Monte Carlo lower bound on the covering radius of a sample set.

    Draws probe points uniformly in the box (default: the samples' bounding
    box) and reports the largest nearest-neighbour Euclidean distance found.
    """
    mat = np.asarray([np.ravel(s) for s in samples], dtype=float)
    if mat.size == 0:
        raise ValueError("sample set is empty")
    if n_probes < 1:
        raise ValueError(f"n_probes must be >= 1, got {n_probes}")
    lo = mat.min(axis=0) if low is None else np.broadcast_to(np.asarray(low, float), mat.shape[1:])
    hi = mat.max(axis=0) if high is None else np.broadcast_to(np.asarray(high, float), mat.shape[1:])
    sq_norms = (mat**2).sum(axis=1)
    worst = 0.0
    remaining = n_probes
    while remaining > 0:
        take = min(probe_chunk, remaining)
        remaining -= take
        probes = rng.uniform(lo, hi, size=(take, mat.shape[1]))
        d2 = (probes**2).sum(axis=1)[:, None] + sq_norms[None, :] - 2.0 * probes @ mat.T
        nearest = np.sqrt(np.maximum(d2.min(axis=1), 0.0))
        worst = max(worst, float(nearest.max()))
    return worst
