"""Linear influence network: effective security values, compromise odds, stage rewards.

Assets are indexed 0..n-1. The influence matrix is column-stochastic (column j
says how asset j's standalone value is spread across the network); the
vulnerability matrix is not, because compromised assets keep weakening their
neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .kvfile import ConfigError, load_kv

if TYPE_CHECKING:
    from .game import GameConfig

COLUMN_SUM_TOL = 1e-9


class NetworkError(ValueError):
    """Raised when a network definition violates its invariants."""


@dataclass(frozen=True)
class NetworkState:
    """Set of compromised assets, or the distinguished absorbing terminal state."""

    compromised: frozenset = frozenset()
    is_terminal: bool = False

    def __post_init__(self):
        # terminal canonicalizes to an empty compromised set
        comp = frozenset() if self.is_terminal else frozenset(self.compromised)
        object.__setattr__(self, "compromised", comp)

    @staticmethod
    def initial() -> "NetworkState":
        return NetworkState(frozenset())

    @staticmethod
    def terminal() -> "NetworkState":
        return NetworkState(frozenset(), is_terminal=True)

    @staticmethod
    def from_mask(mask: int, n: int) -> "NetworkState":
        return NetworkState(frozenset(i for i in range(n) if (mask >> i) & 1))

    def mask(self) -> int:
        return sum(1 << i for i in self.compromised)

    def with_compromised(self, i: int) -> "NetworkState":
        return NetworkState(self.compromised | {i})


@dataclass(frozen=True)
class InfluenceNetwork:
    """Immutable network instance: influence matrix, vulnerability matrix, asset values."""

    base_influence: np.ndarray
    vulnerability: np.ndarray
    asset_values: np.ndarray

    def __post_init__(self):
        inf = _as_matrix(self.base_influence, "influence")
        vul = _as_matrix(self.vulnerability, "vulnerability")
        x = np.asarray(self.asset_values, dtype=float).copy()
        n = inf.shape[0]
        if vul.shape != (n, n):
            raise NetworkError(
                f"vulnerability: shape {vul.shape} does not match influence shape {inf.shape}"
            )
        if x.ndim != 1 or x.shape[0] != n:
            raise NetworkError(f"asset_values: expected {n} entries, got shape {x.shape}")

        for j in range(n):
            col = inf[:, j]
            bad = np.flatnonzero((col != 0) & ((col <= 0) | (col > 1)))
            if bad.size:
                raise NetworkError(
                    f"influence: row {bad[0]}, column {j}: weight {col[bad[0]]} outside (0, 1]"
                )
            csum = col.sum()
            if abs(csum - 1.0) > COLUMN_SUM_TOL:
                raise NetworkError(f"influence: column {j} sums to {csum}, expected 1")
        bad_rows, bad_cols = np.nonzero((vul < 0) | (vul > 1))
        if bad_rows.size:
            i, j = bad_rows[0], bad_cols[0]
            raise NetworkError(f"vulnerability: row {i}, column {j}: {vul[i, j]} outside [0, 1]")
        neg = np.flatnonzero(x < 0)
        if neg.size:
            raise NetworkError(f"asset_values: row {neg[0]}: {x[neg[0]]} is negative")

        for arr in (inf, vul, x):
            arr.setflags(write=False)
        object.__setattr__(self, "base_influence", inf)
        object.__setattr__(self, "vulnerability", vul)
        object.__setattr__(self, "asset_values", x)

    @property
    def n(self) -> int:
        return self.base_influence.shape[0]


def _as_matrix(value, key: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float).copy()
    except (TypeError, ValueError) as exc:
        raise NetworkError(f"{key}: rows must be numeric lists ({exc})") from exc
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NetworkError(f"{key}: expected a square matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        row = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise NetworkError(f"{key}: row {row} contains a non-finite entry")
    return arr


def support(net: InfluenceNetwork, j: int) -> float:
    """Total vulnerability support v_j flowing into asset j (column sum of V).

    State-independent: compromised assets still contribute support.
    """
    if not 0 <= j < net.n:
        raise IndexError(f"asset index {j} out of range for n={net.n}")
    return float(net.vulnerability[:, j].sum())


def effective_influence(net: InfluenceNetwork, state: NetworkState) -> np.ndarray:
    """Influence matrix with compromised assets removed from the network.

    Rows and columns of compromised assets are zeroed; every uncompromised
    column is renormalized over the uncompromised rows so it stays stochastic.
    A column left with no support gets weight 1 on its own diagonal.
    """
    if state.is_terminal:
        raise ValueError("terminal state has no influence matrix")
    mat = np.array(net.base_influence)
    comp = sorted(state.compromised)
    if comp and max(comp) >= net.n:
        raise IndexError(f"compromised index {max(comp)} out of range for n={net.n}")
    if not comp:
        return mat
    mat[comp, :] = 0.0
    mat[:, comp] = 0.0
    for j in range(net.n):
        if j in state.compromised:
            continue
        total = mat[:, j].sum()
        if total > 0:
            mat[:, j] /= total
        else:
            mat[j, j] = 1.0
    return mat


def effective_values(net: InfluenceNetwork, state: NetworkState) -> np.ndarray:
    """Per-asset effective security values y = I(s) x, zero for compromised assets."""
    y = effective_influence(net, state) @ net.asset_values
    if state.compromised:
        y[sorted(state.compromised)] = 0.0
    return y


def compromise_prob(
    net: InfluenceNetwork,
    cfg: "GameConfig",
    state: NetworkState,
    u: int,
    d: int,
    i: int,
) -> float:
    """Probability that asset i falls this stage, given attack u and defense d.

    Nonzero only when i is the attacked asset and still uncompromised; defended
    and undefended cases interpolate the standalone probabilities by the
    support v_i. The result is clamped to [0, 1].
    """
    if not 0 <= i < net.n:
        raise IndexError(f"asset index {i} out of range for n={net.n}")
    if state.is_terminal or u != i or i in state.compromised:
        return 0.0
    v_i = support(net, i)
    if d == i:
        p = cfg.p_d0 * (1.0 - v_i) + cfg.p_d1 * v_i
    else:
        p = cfg.p_n0 * (1.0 - v_i) + cfg.p_n1 * v_i
    return min(max(p, 0.0), 1.0)


def attacker_reward(
    net: InfluenceNetwork, cfg: "GameConfig", state: NetworkState, u: int, d: int
) -> float:
    """Expected stage prize p^u(s,u,d) * y_u(s); zero for no-op, terminal, or a dead target."""
    if state.is_terminal or u >= net.n or u in state.compromised:
        return 0.0
    p = compromise_prob(net, cfg, state, u, d, u)
    if p == 0.0:
        return 0.0
    return p * float(effective_values(net, state)[u])


def defender_reward(
    net: InfluenceNetwork, cfg: "GameConfig", state: NetworkState, u: int, d: int
) -> float:
    """Defender stage reward; `cfg.defender_reward_mode` selects the map."""
    mode = cfg.defender_reward_mode
    if mode == "zero_sum":
        return -attacker_reward(net, cfg, state, u, d)
    if mode == "zero":
        return 0.0
    raise ValueError(f"unknown defender_reward mode {mode!r}")


def default_network() -> InfluenceNetwork:
    """The three-asset reference instance used throughout the demos and tests."""
    return InfluenceNetwork(
        base_influence=np.array([[0.9, 0.2, 0.0], [0.0, 0.7, 0.0], [0.1, 0.1, 1.0]]),
        vulnerability=np.array([[0.7, 0.0, 0.0], [0.2, 0.5, 0.0], [0.1, 0.3, 0.9]]),
        asset_values=np.array([10.0, 10.0, 20.0]),
    )


NETWORK_KEYS = ("influence", "vulnerability", "asset_values")


def parse_network(mapping: dict, source: str = "<mapping>") -> InfluenceNetwork:
    """Build an InfluenceNetwork from parsed key-value data, validating keys."""
    missing = [k for k in NETWORK_KEYS if k not in mapping]
    if missing:
        raise NetworkError(f"{source}: missing key {missing[0]!r}")
    unknown = [k for k in mapping if k not in NETWORK_KEYS]
    if unknown:
        raise NetworkError(f"{source}: unknown key {unknown[0]!r}")
    return InfluenceNetwork(
        base_influence=_matrix_from_rows(mapping["influence"], "influence"),
        vulnerability=_matrix_from_rows(mapping["vulnerability"], "vulnerability"),
        asset_values=np.asarray(mapping["asset_values"], dtype=float),
    )


def load_network(path: str | Path) -> InfluenceNetwork:
    """Load a network definition file (keys: influence, vulnerability, asset_values)."""
    try:
        mapping = load_kv(path)
    except ConfigError as exc:
        raise NetworkError(str(exc)) from exc
    return parse_network(mapping, source=str(path))


def _matrix_from_rows(rows, key: str) -> np.ndarray:
    if not isinstance(rows, Iterable) or isinstance(rows, str):
        raise NetworkError(f"{key}: expected a list of numeric rows")
    rows = list(rows)
    width = None
    for r, row in enumerate(rows):
        if not isinstance(row, (list, tuple)):
            raise NetworkError(f"{key}: row {r} is not a numeric list")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise NetworkError(f"{key}: row {r} has {len(row)} entries, expected {width}")
    return np.asarray(rows, dtype=float)
