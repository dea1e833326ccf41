"""Command-line driver: train, run, sweep-tau, compare, bounds, verify."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .attacker import (
    AttackerMdp,
    AttackerState,
    BoundInputs,
    asymptotic_bound,
    epsilon_bound,
    estimate_covering_radius,
)
from .baselines import ATTACKER_KINDS
from .config import ExperimentConfig, load_experiment
from .exact import (
    exact_policy_value,
    exact_vi,
    mc_truncated_return,
    q_from_values,
    static_defender_mdp,
    two_state_chain,
)
from .game import GameConfig, transition_support
from .harness import aggregate, emit_outputs, run_experiment, sampler_from_config, train_model
from .iql import IqlParams, new_table
from .kvfile import ConfigError
from .mlp import MlpSpec, grad_check, init_model, save_model
from .network import NetworkError, NetworkState, default_network, effective_values, support


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linsec",
        description="Stochastic security games on linear influence networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "train": (cmd_train, "fit the attacker's value model and write a checkpoint"),
        "run": (cmd_run, "run one experiment configuration and write CSV/plot outputs"),
        "sweep-tau": (cmd_sweep_tau, "repeat the experiment across the configured tau list"),
        "compare": (cmd_compare, "run every attacker kind at the configured tau"),
        "bounds": (cmd_bounds, "report the approximation error bound diagnostics"),
        "verify": (cmd_verify, "run the exact-evaluator suite and print pass/fail lines"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", type=str, default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=1, help="parallel trial workers")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _load(args) -> ExperimentConfig:
    return load_experiment(args.config, {"seed": args.seed, "out": args.out})


def _mdp(exp: ExperimentConfig) -> AttackerMdp:
    return AttackerMdp(exp.load_net(), exp.game, exp.defender)


def _checkpoint_path(out: Path, kind: str, tau: float) -> Path:
    return out / f"model_{kind}_tau{tau:g}.npz"


def _train_and_save(exp: ExperimentConfig, mdp: AttackerMdp, kind: str, out: Path):
    model, losses = train_model(exp, mdp, kind)
    out.mkdir(parents=True, exist_ok=True)
    path = _checkpoint_path(out, kind, exp.defender.tau)
    save_model(model, path)
    print(f"trained {kind} for {exp.horizons} horizons "
          f"(final train mse {losses[-1]:.4g}) -> {path}")
    return model, losses


def _print_summary(rows) -> None:
    print(f"{'attacker':>10} {'tau':>6} {'model':>6} {'trials':>7} "
          f"{'mean_return':>12} {'std_error':>10}")
    for r in rows:
        print(f"{r['attacker']:>10} {r['tau']:>6g} {r['model'] or '-':>6} "
              f"{r['n_trials']:>7d} {r['mean_return']:>12.4f} {r['std_error']:>10.4f}")


def cmd_train(args) -> int:
    exp = _load(args)
    mdp = _mdp(exp)
    kind = exp.attacker.split("_", 1)[1] if exp.attacker.startswith("ndp_") else exp.model
    out = Path(exp.out)
    _, losses = _train_and_save(exp, mdp, kind, out)
    with open(out / "train_losses.csv", "w") as fh:
        fh.write("horizon,train_mse\n")
        for k, loss in enumerate(losses):
            fh.write(f"{k},{loss!r}\n")
    return 0


def cmd_run(args) -> int:
    exp = _load(args)
    mdp = _mdp(exp)
    out = Path(exp.out)
    model = None
    if exp.attacker.startswith("ndp_"):
        model, _ = _train_and_save(exp, mdp, exp.attacker.split("_", 1)[1], out)
    result = run_experiment(exp, mdp, model=model, threads=args.threads)
    paths = emit_outputs([result], out)
    _print_summary(aggregate([result]))
    print(f"wrote {paths['episodes']}, {paths['summary']}, {paths['plot']}")
    return 0


def cmd_sweep_tau(args) -> int:
    exp = _load(args)
    out = Path(exp.out)
    runs = []
    for tau in exp.taus:
        exp_tau = exp.with_tau(tau)
        mdp = _mdp(exp_tau)
        model = None
        if exp.attacker.startswith("ndp_"):
            model, _ = _train_and_save(exp_tau, mdp, exp.attacker.split("_", 1)[1], out)
        runs.append(run_experiment(exp_tau, mdp, model=model, threads=args.threads))
    paths = emit_outputs(runs, out)
    _print_summary(aggregate(runs))
    print(f"wrote {paths['episodes']}, {paths['summary']}, {paths['plot']}")
    return 0


def cmd_compare(args) -> int:
    exp = _load(args)
    mdp = _mdp(exp)
    out = Path(exp.out)
    models = {}
    for kind in ("cm", "sm"):
        models[kind], _ = _train_and_save(exp, mdp, kind, out)
    runs = []
    for kind in ATTACKER_KINDS:
        model = models.get(kind.split("_", 1)[1]) if kind.startswith("ndp_") else None
        runs.append(run_experiment(exp, mdp, attacker_kind=kind, model=model, threads=args.threads))
    paths = emit_outputs(runs, out)
    _print_summary(aggregate(runs))
    print(f"wrote {paths['episodes']}, {paths['summary']}, {paths['plot']}")
    return 0


def cmd_bounds(args) -> int:
    exp = _load(args)
    mdp = _mdp(exp)
    sampler = sampler_from_config(exp, mdp)
    rng = np.random.default_rng(np.random.SeedSequence((exp.seed, 3)))
    low = np.broadcast_to(np.asarray(sampler.q_low, float), (mdp.input_dim,))
    high = np.broadcast_to(np.asarray(sampler.q_high, float), (mdp.input_dim,))
    samples = rng.uniform(low, high, size=(sampler.n_samples, mdp.input_dim))
    delta = estimate_covering_radius(samples, n_probes=1024, rng=rng, low=low, high=high)
    r_max = mdp.r_max()
    bound = BoundInputs(
        delta=delta,
        tau=mdp.defender.tau,
        gamma=exp.game.gamma,
        d_count=mdp.n_actions,
        r_max=r_max,
    )
    eps = epsilon_bound(bound)
    asym = asymptotic_bound(eps, exp.game.gamma)
    lines = [
        f"samples                  {sampler.n_samples}",
        f"q box                    [{low.min():.6g}, {high.max():.6g}] per entry",
        f"r_max                    {r_max:.6g}",
        f"covering radius (lower)  {delta:.6g}",
        f"one-step epsilon bound   {eps:.6g}",
        f"asymptotic bound         {asym:.6g}",
    ]
    report = "\n".join(lines)
    print(report)
    out = Path(exp.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bounds.txt").write_text(report + "\n")
    return 0


def cmd_verify(args) -> int:
    """Exact-evaluator suite on the built-in reference instance (ignores --config)."""
    seed = args.seed if args.seed is not None else 0
    failures = 0
    for name, ok, detail in _verify_checks(seed):
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        if not ok:
            failures += 1
    print(f"{failures} failure(s)" if failures else "all checks passed")
    return 1 if failures else 0


def _verify_checks(seed: int):
    net = default_network()
    cfg = GameConfig(p_n0=0.7, p_n1=0.4, p_d0=0.5, p_d1=0.2, p_r=0.2, p_e=0.3)
    defender = IqlParams(alpha=0.05, gamma=0.95, tau=1.0)
    mdp = AttackerMdp(net, cfg, defender)
    rng = np.random.default_rng(seed)
    checks = []

    y = effective_values(net, NetworkState.initial())
    supports = np.array([support(net, j) for j in range(net.n)])
    probs = np.array([mdp.kernel.reward_u[0, 2, 0] / y[2],
                      mdp.kernel.reward_u[0, 0, 1] / y[0],
                      mdp.kernel.reward_u[0, 1, 1] / y[1]])
    res = max(
        np.abs(y - [11.0, 7.0, 22.0]).max(),
        np.abs(supports - [1.0, 0.8, 0.9]).max(),
        np.abs(probs - [0.43, 0.4, 0.26]).max(),
    )
    checks.append(("lin arithmetic", res < 1e-12, f"residual {res:.2e}"))

    worst = 0.0
    for s in range(mdp.n_states):
        for u in range(mdp.n_actions):
            for d in range(mdp.n_actions):
                total = sum(p for _, p in mdp.kernel.support(s, u, d))
                worst = max(worst, abs(total - 1.0))
    example = dict(
        (tuple(sorted(st.compromised)) if not st.is_terminal else "end", p)
        for st, p in transition_support(net, cfg, NetworkState.initial(), 0, 1)
    )
    ok = (
        worst < 1e-12
        and abs(example.get((0,), 0.0) - 0.4) < 1e-12
        and abs(example.get((), 0.0) - 0.42) < 1e-12
        and abs(example.get("end", 0.0) - 0.18) < 1e-12
    )
    checks.append(("transition kernel", ok, f"worst mass residual {worst:.2e}"))

    chain = two_state_chain()
    v, _ = exact_vi(chain, tol=1e-11)
    res = max(abs(v[0] - 7040.0 / 181.0), abs(v[1] - 40.0))
    checks.append(("closed-form chain values", res < 1e-8, f"residual {res:.2e}"))

    sd_mdp = static_defender_mdp(net, cfg, new_table(mdp.n_states, mdp.n_actions), 1.0)
    v_sd, pol_sd = exact_vi(sd_mdp, tol=1e-10)
    residual = np.abs(q_from_values(sd_mdp, v_sd).max(axis=1) - v_sd).max()
    checks.append(("static-defender bellman residual", residual <= 1e-10,
                   f"residual {residual:.2e}, initial-state policy attacks asset {pol_sd[0] + 1}"))

    eps = epsilon_bound(BoundInputs(delta=0.1, tau=1.0, gamma=0.95, d_count=4, r_max=9.46))
    mult = asymptotic_bound(1.0, 0.95)
    res = max(abs(eps - 15136.0), abs(mult - 760.0))
    checks.append(("bound arithmetic", res < 1e-9, f"residual {res:.2e}"))

    for kind, spec in (("sm", MlpSpec(36, (), 9)), ("cm", MlpSpec(36, (64, 64, 32), 9))):
        model = init_model(spec, rng)
        x = rng.uniform(-1.0, 1.0, size=(32, 36))
        idx = rng.integers(0, 9, size=32)
        t = rng.normal(size=32)
        err = grad_check(model, x, idx, t, rng=rng)
        checks.append((f"gradient check ({kind})", err < 1e-4, f"max relative error {err:.2e}"))

    mismatches = 0
    for _ in range(1000):
        s = int(rng.integers(0, mdp.n_states))
        q = rng.uniform(-20.0, 0.0, size=(mdp.n_states, mdp.n_actions))
        z = AttackerState(mdp.kernel.states[s], q)
        brute = int(np.argmax([mdp.expected_reward(z, u) for u in range(mdp.n_actions)]))
        if mdp.act(z, None) != brute:
            mismatches += 1
    checks.append(("myopic lookahead = reward argmax", mismatches == 0, f"{mismatches} mismatches"))

    z0 = AttackerState(NetworkState.initial(), new_table(mdp.n_states, mdp.n_actions))
    greedy = lambda z: mdp.act(z, None)
    exact_val = exact_policy_value(mdp, z0, greedy, horizon=3)
    mc_val, mc_se = mc_truncated_return(mdp, greedy, horizon=3, episodes=20_000,
                                        rng=np.random.default_rng(seed + 1))
    gap = abs(mc_val - exact_val)
    checks.append(("monte carlo vs exact (H=3)", gap <= 3.0 * mc_se,
                   f"exact {exact_val:.4f}, mc {mc_val:.4f} +- {mc_se:.4f}"))
    return checks
