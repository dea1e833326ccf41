"""Experiment configuration: flat key-value files with a fixed key set.

Unknown keys are rejected outright so typos fail loudly. The `network` key
points at a separate network definition file; when omitted, the built-in
three-asset reference instance is used.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

from .baselines import ATTACKER_KINDS
from .game import GameConfig
from .iql import IqlParams
from .kvfile import ConfigError, load_kv
from .network import InfluenceNetwork, default_network, load_network

_DEFAULTS = {
    "network": None,
    "p_n0": 0.7,
    "p_n1": 0.4,
    "p_d0": 0.5,
    "p_d1": 0.2,
    "p_r": 0.2,
    "p_e": 0.3,
    "gamma": 0.95,
    "episode_cap": 500,
    "defender_reward": "zero_sum",
    "alpha": 0.05,
    "tau": 1.0,
    "attacker": "fi_greedy",
    "horizons": 20,
    "samples_per_horizon": 100_000,
    "epochs": 2,
    "trajectory_mix": 0.0,
    "q_box": "auto",
    "q_low": None,
    "q_high": None,
    "model": "cm",
    "seed": 0,
    "trials": 20,
    "episodes": 500,
    "out": "results",
    "taus": (0.5, 1.0, 2.0),
}

_INT_KEYS = ("episode_cap", "horizons", "samples_per_horizon", "epochs", "seed", "trials", "episodes")
_FLOAT_KEYS = (
    "p_n0",
    "p_n1",
    "p_d0",
    "p_d1",
    "p_r",
    "p_e",
    "gamma",
    "alpha",
    "tau",
    "trajectory_mix",
    "q_low",
    "q_high",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; see _DEFAULTS for the key set."""

    network: Optional[str]
    game: GameConfig
    defender: IqlParams
    attacker: str
    horizons: int
    samples_per_horizon: int
    epochs: int
    trajectory_mix: float
    q_box: str
    q_low: Optional[float]
    q_high: Optional[float]
    model: str
    seed: int
    trials: int
    episodes: int
    out: str
    taus: Tuple[float, ...]

    def with_tau(self, tau: float) -> "ExperimentConfig":
        return replace(self, defender=IqlParams(self.defender.alpha, self.defender.gamma, tau))

    def load_net(self) -> InfluenceNetwork:
        if self.network is None:
            return default_network()
        return load_network(self.network)


def experiment_from_mapping(mapping: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a parsed key-value mapping and assemble the config objects."""
    unknown = [k for k in mapping if k not in _DEFAULTS]
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}")
    merged = dict(_DEFAULTS)
    merged.update(mapping)

    for key in _INT_KEYS:
        merged[key] = _as_int(key, merged[key])
    for key in _FLOAT_KEYS:
        if merged[key] is not None:
            merged[key] = _as_float(key, merged[key])

    if merged["attacker"] not in ATTACKER_KINDS:
        raise ConfigError(f"attacker must be one of {ATTACKER_KINDS}, got {merged['attacker']!r}")
    if merged["model"] not in ("cm", "sm"):
        raise ConfigError(f"model must be 'cm' or 'sm', got {merged['model']!r}")
    if merged["q_box"] not in ("auto", "explicit"):
        raise ConfigError(f"q_box must be 'auto' or 'explicit', got {merged['q_box']!r}")
    if merged["q_box"] == "explicit":
        if merged["q_low"] is None or merged["q_high"] is None:
            raise ConfigError("q_box = explicit requires q_low and q_high")
        if merged["q_low"] > merged["q_high"]:
            raise ConfigError("q_low must be <= q_high")
    elif merged["q_low"] is not None or merged["q_high"] is not None:
        raise ConfigError("q_low / q_high require q_box = explicit")
    if merged["trials"] < 1 or merged["episodes"] < 1:
        raise ConfigError("trials and episodes must be >= 1")
    if merged["horizons"] < 1 or merged["samples_per_horizon"] < 1:
        raise ConfigError("horizons and samples_per_horizon must be >= 1")
    if not 0.0 <= merged["trajectory_mix"] <= 1.0:
        raise ConfigError("trajectory_mix must lie in [0, 1]")

    taus = merged["taus"]
    if isinstance(taus, (int, float)):
        taus = (float(taus),)
    try:
        taus = tuple(float(t) for t in taus)
    except (TypeError, ValueError):
        raise ConfigError(f"taus must be a list of numbers, got {merged['taus']!r}")
    if not taus or any(t <= 0 for t in taus):
        raise ConfigError("taus must be non-empty and positive")

    network = merged["network"]
    if network is not None:
        network = str(network)
        if base_dir is not None and not Path(network).is_absolute():
            network = str(base_dir / network)
        if not Path(network).exists():
            raise ConfigError(f"network file not found: {network}")

    try:
        game = GameConfig(
            p_n0=merged["p_n0"],
            p_n1=merged["p_n1"],
            p_d0=merged["p_d0"],
            p_d1=merged["p_d1"],
            p_r=merged["p_r"],
            p_e=merged["p_e"],
            gamma=merged["gamma"],
            episode_cap=merged["episode_cap"],
            defender_reward_mode=merged["defender_reward"],
        )
        defender = IqlParams(alpha=merged["alpha"], gamma=merged["gamma"], tau=merged["tau"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return ExperimentConfig(
        network=network,
        game=game,
        defender=defender,
        attacker=merged["attacker"],
        horizons=merged["horizons"],
        samples_per_horizon=merged["samples_per_horizon"],
        epochs=merged["epochs"],
        trajectory_mix=merged["trajectory_mix"],
        q_box=merged["q_box"],
        q_low=merged["q_low"],
        q_high=merged["q_high"],
        model=merged["model"],
        seed=merged["seed"],
        trials=merged["trials"],
        episodes=merged["episodes"],
        out=str(merged["out"]),
        taus=taus,
    )


def load_experiment(path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read a config file (or start from defaults) and apply CLI overrides."""
    mapping: dict = {}
    base_dir = None
    if path is not None:
        mapping = load_kv(path)
        base_dir = Path(path).resolve().parent
    if overrides:
        mapping.update({k: v for k, v in overrides.items() if v is not None})
    return experiment_from_mapping(mapping, base_dir=base_dir)


def _as_int(key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return value


def _as_float(key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return float(value)
