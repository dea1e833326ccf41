"""Attacker policies compared in the experiments.

Four kinds: the value-iterating attacker with either model architecture
(`ndp_cm`, `ndp_sm`), the myopic full-information best response (`fi_greedy`),
and a plain learning attacker (`iql`) with no access to the defender's table.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .attacker import AttackerMdp, AttackerState, _make_forward
from .iql import IqlParams, QTable, boltzmann, new_table, q_update, sample_action
from .mlp import MlpModel

ATTACKER_KINDS = ("ndp_cm", "ndp_sm", "fi_greedy", "iql")


def fi_greedy_act(mdp: AttackerMdp, z: AttackerState) -> int:
    """Best immediate expected reward against the defender's current softmax play.

    Equals the lookahead attacker run with an all-zero value model; ties break
    to the lowest action index.
    """
    return mdp.act(z, None)


def iql_attacker_step(
    q: QTable,
    s: int,
    params: IqlParams,
    rng: np.random.Generator,
    update: Optional[Tuple[int, int, float, int]] = None,
) -> Tuple[int, QTable]:
    """One turn of the learning attacker: fold in the pending observation, then act.

    `update` is the previous (state, own action, reward, next state) tuple, if
    any. Returns the sampled attack and the (possibly) updated table; the same
    tabular machinery the defender runs, pointed at the attacker's rewards.
    """
    if update is not None:
        q = q_update(q, *update, params)
    action = sample_action(boltzmann(q[s], params.tau), rng)
    return action, q


class OmniscientAttacker:
    """NDP or greedy attacker: tracks the defender's table and plays lookahead.

    The internal mirror starts at zeros (like the defender) and is advanced
    only from observed joint actions, so it stays bit-exact with the live
    table without ever reading it.
    """

    def __init__(self, mdp: AttackerMdp, model: Optional[MlpModel] = None):
        self.mdp = mdp
        self._fwd = None if model is None else _make_forward(model)
        self.mirror = new_table(mdp.n_states, mdp.n_actions)

    def reset_trial(self) -> None:
        self.mirror = new_table(self.mdp.n_states, self.mdp.n_actions)

    def act(self, s: int, rng: np.random.Generator) -> int:
        return self.mdp._act_index(s, self.mirror, self._fwd)

    def observe(self, s: int, u: int, d: int, r_u: float, s_next: int) -> None:
        self.mirror = self.mdp.track_defender(self.mirror, s, d, u, s_next)


class IqlAttacker:
    """Learning attacker: independent Q-learning on its own rewards only."""

    def __init__(self, mdp: AttackerMdp, params: IqlParams):
        self.mdp = mdp
        self.params = params
        self.q = new_table(mdp.n_states, mdp.n_actions)
        self._pending: Optional[Tuple[int, int, float, int]] = None

    def reset_trial(self) -> None:
        self.q = new_table(self.mdp.n_states, self.mdp.n_actions)
        self._pending = None

    def act(self, s: int, rng: np.random.Generator) -> int:
        action, self.q = iql_attacker_step(self.q, s, self.params, rng, self._pending)
        self._pending = None
        return action

    def observe(self, s: int, u: int, d: int, r_u: float, s_next: int) -> None:
        self._pending = (s, u, r_u, s_next)


def make_attacker(
    kind: str,
    mdp: AttackerMdp,
    model: Optional[MlpModel] = None,
    iql_params: Optional[IqlParams] = None,
):
    """Instantiate one of the comparison attackers by config name."""
    if kind in ("ndp_cm", "ndp_sm"):
        if model is None:
            raise ValueError(f"attacker kind {kind!r} needs a trained value model")
        return OmniscientAttacker(mdp, model)
    if kind == "fi_greedy":
        return OmniscientAttacker(mdp, None)
    if kind == "iql":
        return IqlAttacker(mdp, iql_params if iql_params is not None else mdp.defender)
    raise ValueError(f"unknown attacker kind {kind!r} (expected one of {ATTACKER_KINDS})")
