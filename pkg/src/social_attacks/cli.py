"""Command line entry point: ``simulate``, ``analyze``, ``attack`` and ``plot``.

Exit codes: 0 success, 2 config error, 3 numeric/feasibility error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import misleads_both_states
from .config import ExperimentConfig, build_scenario, config_hash, load_config
from .engine import classify_limit, run_monte_carlo
from .errors import ConfigError, NumericError, SocialAttackError
from .models import network_divergence
from .output import CsvFormatError, plot_summaries, write_summary_csv, write_trajectory_csv

log = logging.getLogger("social_attacks")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["base_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise ConfigError("trials must be >= 1", "--trials")
        updates["trials"] = args.trials
    return cfg.model_copy(update=updates) if updates else cfg


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _prediction_dict(pred) -> dict:
    return {
        "theta1": {"outcome": pred.outcomes[0].value, "margin": pred.margins[0],
                   "normal_side": pred.normal_side[0], "malicious_side": pred.malicious_side[0]},
        "theta2": {"outcome": pred.outcomes[1].value, "margin": pred.margins[1],
                   "normal_side": pred.normal_side[1], "malicious_side": pred.malicious_side[1]},
    }


def cmd_simulate(args) -> int:
    cfg = _load(args)
    scenario = build_scenario(cfg)
    out = _out_dir(args, cfg)
    summary = run_monte_carlo(scenario, cfg.trials, keep_trajectories=cfg.output.write_trajectories)
    if summary.trajectories:
        for t, traj in enumerate(summary.trajectories):
            write_trajectory_csv(out / f"trajectory_trial{t:03d}.csv", traj)
    write_summary_csv(out / "summary.csv", summary.mean_trajectory)
    manifest = {
        "version": __version__,
        "config": cfg.model_dump(mode="json"),
        "config_sha256": config_hash(cfg),
        "seeds": summary.seeds,
        "true_state": cfg.true_state,
        "iterations": cfg.iterations,
        "trials": cfg.trials,
        "clamp_events": sorted({ev for a in summary.attacks for ev in a.clamp_events}),
        "prediction": _prediction_dict(summary.predictions[0]),
        "per_trial": [
            {"seed": s, "outcome": o.value, "predicted": summary.predicted(t).value}
            for t, (s, o) in enumerate(zip(summary.seeds, summary.outcomes))
        ],
        "agreement_rate": summary.agreement_rate,
        "final_avg_belief_true_state": float(summary.mean_trajectory[-1]),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    counts = {o: sum(x.value == o for x in summary.outcomes) for o in ("true", "wrong", "undecided")}
    print(f"trials={cfg.trials} outcomes={counts} agreement={summary.agreement_rate} "
          f"final_avg_belief={summary.mean_trajectory[-1]:.6g} -> {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load(args)
    scenario = build_scenario(cfg)
    out = _out_dir(args, cfg)
    net, u, models = scenario.network, scenario.centrality, scenario.models
    attack = scenario.attack_for_trial(cfg.base_seed)
    pred = classify_limit(net, u, models, attack)
    S = [network_divergence(net, u, models, s) for s in (0, 1)]
    report = {
        "network": net.name,
        "centrality": u.tolist(),
        "malicious": net.malicious,
        "attack": attack.describe(),
        "network_divergence": {"S1": S[0], "S2": S[1]},
        "adversary_contributions": {str(k): list(v) for k, v in pred.contributions.items()},
        "prediction": _prediction_dict(pred),
    }
    print(f"network: {net.name}  attack: {attack.describe()}")
    print(f"S1 = {S[0]:.9f}  S2 = {S[1]:.9f}")
    for k, (c1, c2) in pred.contributions.items():
        print(f"  adversary {k:3d} (u={u[k]:.6f}): theta1 {c1:+.9f}  theta2 {c2:+.9f}")
    for s, name in enumerate(("theta1", "theta2")):
        print(f"true={name}: normal {pred.normal_side[s]:.9f}  malicious {pred.malicious_side[s]:.9f}  "
              f"margin {pred.margins[s]:+.9f}  -> {pred.outcomes[s].value}")
    (out / "analysis.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = _load(args)
    scenario = build_scenario(cfg)
    out = _out_dir(args, cfg)
    net, u, models = scenario.network, scenario.centrality, scenario.models
    attack = scenario.attack_for_trial(cfg.base_seed)
    if scenario.divergences is not None:
        S1, S2 = scenario.divergences
    else:
        S1, S2 = (network_divergence(net, u, models, s) for s in (0, 1))
    agents = []
    for k, dist in sorted(attack.distortions.items()):
        u_k = scenario.u_override if scenario.u_override is not None else float(u[k])
        ok, margins = misleads_both_states(models[k], u_k, dist.L1, dist.L2, S1, S2)
        entry = {
            "agent": k,
            "regime": dist.regime,
            "L1_hat": dist.L1.tolist(),
            "L2_hat": dist.L2.tolist(),
            "clamp_events": list(dist.clamped),
            "checker": {"u": u_k, "S1": S1, "S2": S2, "misleads_both": ok, "margins": list(margins)},
        }
        if dist.params is not None:
            p = dist.params
            entry["construction"] = {
                "signal_pair": list(p.signal_pair), "d": p.d, "n1": p.n1, "n2": p.n2,
                "vertex": list(p.vertex), "literal_anchor": list(p.literal_anchor),
                "beta": p.beta, "x1": p.x1, "x2": p.x2, "eps1": p.eps1, "eps2": p.eps2,
                "alpha": p.alpha, "x_plus": p.x_plus, "halvings": p.halvings,
            }
        agents.append(entry)
        print(f"agent {k:3d} [{dist.regime}] L1_hat={np.round(dist.L1, 6).tolist()} "
              f"L2_hat={np.round(dist.L2, 6).tolist()} margins=({margins[0]:+.6f}, {margins[1]:+.6f})")
    doc = {"attack": attack.describe(), "family": attack.family, "prior": list(attack.prior),
           "epsilon": attack.epsilon, "agents": agents}
    (out / "attack.json").write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_plot(args) -> int:
    out = Path(args.out or "plot.svg")
    if out.suffix.lower() != ".svg":
        out = out / "plot.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        plot_summaries(args.csv, args.labels, out, args.title)
    except CsvFormatError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="social-attacks",
        description="Inferential attacks on social learning: simulate, analyze, synthesize, plot.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log clamp events and fallbacks")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (
        ("simulate", cmd_simulate, "run Monte Carlo trials and write CSVs + manifest"),
        ("analyze", cmd_analyze, "evaluate the asymptotic convergence condition"),
        ("attack", cmd_attack, "emit each adversary's distorted likelihoods"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output directory (default: config output.dir)")
        p.add_argument("--seed", type=int, help="override base_seed")
        p.add_argument("--trials", type=int, help="override trials")
        p.set_defaults(func=fn)

    p = sub.add_parser("plot", help="render summary CSVs as an SVG line chart")
    p.add_argument("csv", nargs="+", help="summary CSV files")
    p.add_argument("--labels", nargs="+", help="legend label per CSV")
    p.add_argument("--title", help="chart title")
    p.add_argument("--out", help="SVG path (default plot.svg)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SocialAttackError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
