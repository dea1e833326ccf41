"""Experiment driver: seeded trials, episode loops, aggregation, CSV and plot output.

One trial = one fresh defender table learning across `episodes` episodes (the
table persists through resets and episode boundaries); discounting restarts at
every episode. Trials are statistically independent: each gets its own
generator seeded by (master seed, trial index).
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .attacker import AttackerMdp, SamplerConfig, fitted_value_iteration, value_spec
from .baselines import make_attacker
from .config import ExperimentConfig
from .game import sample_next_index
from .iql import boltzmann, new_table, q_update, sample_action
from .mlp import MlpModel, TrainConfig

EPISODE_COLUMNS = (
    "trial",
    "episode",
    "attacker_return",
    "defender_return",
    "length",
    "cause",
    "attacker",
    "tau",
    "model",
)

SUMMARY_COLUMNS = (
    "attacker",
    "tau",
    "model",
    "n_trials",
    "mean_return",
    "std_error",
    "ci95_low",
    "ci95_high",
    "se_undefined",
)

SMOOTH_WINDOW = 50


@dataclass(frozen=True)
class EpisodeRecord:
    trial: int
    episode: int
    attacker_return: float
    defender_return: float
    length: int
    cause: str  # "terminal" | "cap"


@dataclass(frozen=True)
class RunResult:
    """Records of one experiment configuration, tagged for aggregation."""

    attacker: str
    tau: float
    model: str  # "cm", "sm", or "" for model-free attackers
    records: Tuple[EpisodeRecord, ...]

    def trial_means(self) -> np.ndarray:
        trials = sorted({r.trial for r in self.records})
        sums = {t: [] for t in trials}
        for r in self.records:
            sums[r.trial].append(r.attacker_return)
        return np.array([np.mean(sums[t]) for t in trials])


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Per-trial generator; depends only on (master seed, trial index)."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, trial)))


def run_trial(
    mdp: AttackerMdp,
    attacker_kind: str,
    episodes: int,
    trial: int,
    master_seed: int,
    model: Optional[MlpModel] = None,
) -> List[EpisodeRecord]:
    """Play one trial: fresh zero tables, `episodes` episodes, persistent learning."""
    rng = trial_rng(master_seed, trial)
    attacker = make_attacker(attacker_kind, mdp, model=model)
    kernel = mdp.kernel
    defender = mdp.defender
    gamma = mdp.cfg.gamma
    cap = mdp.cfg.episode_cap
    terminal = mdp.terminal
    defender_q = new_table(mdp.n_states, mdp.n_actions)
    records: List[EpisodeRecord] = []
    for episode in range(episodes):
        s = 0
        att_return = 0.0
        def_return = 0.0
        disc = 1.0
        length = 0
        while s != terminal and length < cap:
            d = sample_action(boltzmann(defender_q[s], defender.tau), rng)
            u = attacker.act(s, rng)
            r_u = float(kernel.reward_u[s, u, d])
            r_d = float(kernel.reward_d[s, u, d])
            s_next = sample_next_index(kernel, s, u, d, rng)
            att_return += disc * r_u
            def_return += disc * r_d
            defender_q = q_update(defender_q, s, d, r_d, s_next, defender)
            attacker.observe(s, u, d, r_u, s_next)
            s = s_next
            disc *= gamma
            length += 1
        cause = "terminal" if s == terminal else "cap"
        records.append(EpisodeRecord(trial, episode, att_return, def_return, length, cause))
    return records


def _trial_task(args) -> List[EpisodeRecord]:
    mdp, kind, episodes, trial, seed, model = args
    return run_trial(mdp, kind, episodes, trial, seed, model)


def run_experiment(
    exp: ExperimentConfig,
    mdp: AttackerMdp,
    attacker_kind: Optional[str] = None,
    model: Optional[MlpModel] = None,
    threads: int = 1,
) -> RunResult:
    """All trials of one configuration; trial order never affects the records."""
    kind = attacker_kind or exp.attacker
    tasks = [(mdp, kind, exp.episodes, t, exp.seed, model) for t in range(exp.trials)]
    if threads > 1 and exp.trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(_trial_task, tasks))
    else:
        per_trial = [_trial_task(task) for task in tasks]
    records = [rec for trial_records in per_trial for rec in trial_records]
    model_tag = kind.split("_", 1)[1] if kind.startswith("ndp_") else ""
    return RunResult(attacker=kind, tau=exp.defender.tau, model=model_tag, records=tuple(records))


def sampler_from_config(exp: ExperimentConfig, mdp: AttackerMdp) -> SamplerConfig:
    if exp.q_box == "explicit":
        low, high = exp.q_low, exp.q_high
    else:
        low, high = mdp.default_q_box()
    return SamplerConfig(
        q_low=low,
        q_high=high,
        n_samples=exp.samples_per_horizon,
        trajectory_mix=exp.trajectory_mix,
    )


def train_model(
    exp: ExperimentConfig, mdp: AttackerMdp, kind: str
) -> tuple[MlpModel, List[float]]:
    """Fitted value iteration per the experiment config; kind is 'cm' or 'sm'."""
    spec = value_spec(kind, mdp.n_states, mdp.n_actions)
    sampler = sampler_from_config(exp, mdp)
    cfg = TrainConfig(epochs=exp.epochs, seed=exp.seed)
    return fitted_value_iteration(
        mdp, spec, sampler, horizons=exp.horizons, train_cfg=cfg, seed=exp.seed
    )


# -- aggregation and output --------------------------------------------------


def aggregate(runs: Sequence[RunResult]) -> List[Dict]:
    """Across-trial summary per configuration: trials are the independent unit."""
    if not runs:
        raise ValueError("no runs to aggregate")
    rows = []
    for run in runs:
        if not run.records:
            raise ValueError(f"run {run.attacker!r} has no records")
        means = run.trial_means()
        n = means.size
        mean = float(means.mean())
        if n > 1:
            se = float(means.std(ddof=1) / np.sqrt(n))
            undefined = False
        else:
            se = 0.0
            undefined = True
        rows.append(
            {
                "attacker": run.attacker,
                "tau": run.tau,
                "model": run.model,
                "n_trials": n,
                "mean_return": mean,
                "std_error": se,
                "ci95_low": mean - 1.96 * se,
                "ci95_high": mean + 1.96 * se,
                "se_undefined": undefined,
            }
        )
    return rows


def emit_outputs(runs: Sequence[RunResult], out_dir: str | Path) -> Dict[str, Path]:
    """Write episodes.csv, summary.csv and the smoothed returns plot (SVG)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = {
        "episodes": out / "episodes.csv",
        "summary": out / "summary.csv",
        "plot": out / "returns.svg",
    }
    _write_episodes(runs, paths["episodes"])
    _write_summary(aggregate(runs), paths["summary"])
    _write_plot(runs, paths["plot"])
    return paths


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_episodes(runs: Sequence[RunResult], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPISODE_COLUMNS)
        for run in runs:
            for r in run.records:
                writer.writerow(
                    [
                        r.trial,
                        r.episode,
                        _fmt(r.attacker_return),
                        _fmt(r.defender_return),
                        r.length,
                        r.cause,
                        run.attacker,
                        _fmt(run.tau),
                        run.model,
                    ]
                )


def read_episodes(path: str | Path) -> List[RunResult]:
    """Inverse of _write_episodes: rebuild the tagged runs from episodes.csv."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != EPISODE_COLUMNS:
            raise ValueError(f"unexpected episodes.csv header: {header}")
        grouped: Dict[tuple, List[EpisodeRecord]] = {}
        order: List[tuple] = []
        for row in reader:
            if len(row) != len(EPISODE_COLUMNS):
                raise ValueError(f"expected {len(EPISODE_COLUMNS)} columns, got {len(row)}")
            key = (row[6], float(row[7]), row[8])
            if key not in grouped:
                grouped[key] = []
                order.append(key)
            grouped[key].append(
                EpisodeRecord(
                    trial=int(row[0]),
                    episode=int(row[1]),
                    attacker_return=float(row[2]),
                    defender_return=float(row[3]),
                    length=int(row[4]),
                    cause=row[5],
                )
            )
    return [
        RunResult(attacker=k[0], tau=k[1], model=k[2], records=tuple(grouped[k])) for k in order
    ]


def _write_summary(rows: List[Dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in SUMMARY_COLUMNS])


def smoothed_mean_returns(run: RunResult, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Across-trial mean attacker return per episode index, then a trailing
    moving average (window shrinks at the start)."""
    episodes = sorted({r.episode for r in run.records})
    index = {e: i for i, e in enumerate(episodes)}
    totals = np.zeros(len(episodes))
    counts = np.zeros(len(episodes))
    for r in run.records:
        totals[index[r.episode]] += r.attacker_return
        counts[index[r.episode]] += 1
    means = totals / np.maximum(counts, 1)
    csum = np.concatenate([[0.0], np.cumsum(means)])
    out = np.empty_like(means)
    for i in range(means.size):
        lo = max(0, i - window + 1)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def _write_plot(runs: Sequence[RunResult], path: Path) -> None:
    from matplotlib.figure import Figure

    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot(111)
    for run in runs:
        label = run.attacker if not run.model else run.attacker
        label = f"{label} (tau={run.tau:g})"
        ax.plot(smoothed_mean_returns(run), label=label)
    ax.set_xlabel("episode")
    ax.set_ylabel(f"mean discounted attacker return (window {SMOOTH_WINDOW})")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
