"""Command-line entry point.

Subcommands: gen-data (synthesize a dataset container), run (paired
baseline-vs-strategy experiment), sweep-lambda (fixed mixing-weight
grid), verify-theorems (Monte-Carlo checks of the noise-reduction
claims), madgap (over-smoothing study across depths).

Every command is deterministic given --seed; reports are JSON with a
CSV (and, unless --no-plot, a PNG figure) written alongside.  Exit
codes: 0 ok, 2 usage or config error, 3 tolerance failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .augment import STRATEGIES, AugmentationConfig, LambdaLaw
from .data import (
    ContainerError,
    SbmConfig,
    generate_sbm,
    load_container,
    make_split,
    save_container,
)
from .gcn import TrainConfig
from .metrics import MadGapConfig
from .pipeline import lambda_sweep, madgap_study, run_experiment
from .pseudolabel import DEFAULT_DROPOUTS, EnsembleConfig
from .theory import (
    MIN_TRIALS,
    LinearGnnConfig,
    NoiseModel,
    bridge_ratio_mc,
    label_noise_exact,
    label_noise_mc,
)

PROB_TOLERANCE = 0.005
RATIO_TOLERANCE = 0.005
BRIDGE_TOLERANCE = 0.01
ETA_GRID = (0.0, 1.0, 3.0)
DEFAULT_LAMBDAS = (0.1, 0.3, 0.5)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_report(report: dict, out: str | None, csv_rows: list[dict] | None,
                  plot_fn, no_plot: bool) -> None:
    """JSON to --out, CSV + PNG alongside it (same stem)."""
    if out is None:
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n")
    if csv_rows:
        with open(path.with_suffix(".csv"), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(csv_rows[0].keys()))
            writer.writeheader()
            writer.writerows(csv_rows)
    if plot_fn is not None and not no_plot:
        plot_fn(report, path.with_suffix(".png"))


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--patience", type=int, default=100)


def _add_aug_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nodes-per-class", type=int, default=200,
                   help="generated nodes per class")
    p.add_argument("--lambda-alpha", type=float, default=2.0)
    p.add_argument("--lambda-beta", type=float, default=2.0)
    p.add_argument("--lambda-fixed", type=float, default=None,
                   help="use a constant mixing weight instead of the Beta law")
    p.add_argument("--ensemble-dropouts", type=str,
                   default=",".join(str(p) for p in DEFAULT_DROPOUTS),
                   help="comma-separated dropout probabilities for certification")


def _add_io_flags(p: argparse.ArgumentParser, seeds_default: int) -> None:
    p.add_argument("--data", type=str, required=True, help="container directory")
    p.add_argument("--seeds", type=int, default=seeds_default, help="number of seeds")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--out", type=str, default=None, help="JSON report path")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")


def _train_cfg(args, seed: int = 0) -> TrainConfig:
    return TrainConfig(hidden_dim=args.hidden, learning_rate=args.lr,
                       weight_decay=args.weight_decay, dropout_prob=args.dropout,
                       max_epochs=args.epochs, patience=args.patience, seed=seed)


def _aug_cfg(args, strategy: str = "intramix") -> AugmentationConfig:
    if args.lambda_fixed is not None:
        law = LambdaLaw.from_fixed(args.lambda_fixed)
    else:
        law = LambdaLaw.from_beta(args.lambda_alpha, args.lambda_beta)
    return AugmentationConfig(nodes_per_class=args.nodes_per_class,
                              lambda_law=law, strategy=strategy, seed=0)


def _ens_cfg(args) -> EnsembleConfig:
    probs = tuple(float(x) for x in args.ensemble_dropouts.split(",") if x)
    return EnsembleConfig(dropout_probs=probs, seed=0)


def _load_for_run(args):
    graph, table, split = load_container(args.data)
    ground_truth = table.labels
    for name, mask in (("validation", split.validation), ("test", split.test)):
        if np.any(ground_truth[mask] < 0):
            raise ContainerError(f"{args.data}: {name} mask contains unlabeled nodes; "
                                 "ground truth is required for evaluation")
    return graph, table, split, ground_truth


def _config_echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def cmd_gen_data(args) -> int:
    cfg = SbmConfig(
        num_classes=args.classes,
        nodes_per_class=args.per_class,
        p_intra=args.p_intra,
        p_inter=args.p_inter,
        feature_dim=args.feature_dim,
        class_mean_separation=args.separation,
        feature_noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    graph, table, _ = generate_sbm(cfg)
    split = make_split(table, args.labels_per_class, args.val_size, args.seed)
    save_container(args.out, graph, table, split)
    print(f"seed {args.seed}: wrote container to {args.out}")
    print(f"  nodes={table.num_nodes} edges={graph.edge_count} classes={table.num_classes}")
    print(f"  train={split.train.size} val={split.validation.size} test={split.test.size}")
    return 0


def cmd_run(args) -> int:
    from .plots import plot_run_report

    if args.strategy not in STRATEGIES:
        print(f"error: unknown strategy {args.strategy!r}", file=sys.stderr)
        return 2
    graph, table, split, gt = _load_for_run(args)
    seeds = list(range(args.seed, args.seed + args.seeds))
    report = run_experiment(graph, table, split, gt, args.strategy, seeds,
                            _train_cfg(args), _aug_cfg(args, args.strategy), _ens_cfg(args))
    report["command"] = "run"
    report["config"] = _config_echo(args)
    rows = [{"seed": r["seed"], "baseline_accuracy": r["baseline_accuracy"],
             "augmented_accuracy": r["augmented_accuracy"]} for r in report["per_seed"]]
    _write_report(report, args.out, rows, plot_run_report, args.no_plot)
    print(f"strategy={args.strategy} seeds={seeds}")
    print(f"  baseline : {report['baseline']['mean']:.4f} ± {report['baseline']['std']:.4f}")
    print(f"  augmented: {report['augmented']['mean']:.4f} ± {report['augmented']['std']:.4f}"
          f"  (gain {report['gain']:+.4f})")
    return 0


def cmd_sweep_lambda(args) -> int:
    from .plots import plot_lambda_sweep

    graph, table, split, gt = _load_for_run(args)
    grid = [float(x) for x in args.lambda_grid.split(",") if x]
    seeds = list(range(args.seed, args.seed + args.seeds))
    report = lambda_sweep(graph, table, split, gt, grid, seeds,
                          _train_cfg(args), _aug_cfg(args), _ens_cfg(args))
    report["command"] = "sweep-lambda"
    report["config"] = _config_echo(args)
    rows = [{"lam": r["lam"], "accuracy_mean": r["accuracy"]["mean"],
             "accuracy_std": r["accuracy"]["std"],
             "noise_magnitude_ratio": r["noise_magnitude_ratio"]} for r in report["rows"]]
    _write_report(report, args.out, rows, plot_lambda_sweep, args.no_plot)
    print(f"sweep over {grid} with seeds={seeds}")
    for r in report["rows"]:
        print(f"  lam={r['lam']:.2f}  acc={r['accuracy']['mean']:.4f} ± {r['accuracy']['std']:.4f}"
              f"  noise-ratio={r['noise_magnitude_ratio']:.5f}")
    return 0


def cmd_verify_theorems(args) -> int:
    from .plots import plot_theorem_report

    if args.trials < MIN_TRIALS:
        print(f"error: --trials {args.trials} is below the minimum {MIN_TRIALS}",
              file=sys.stderr)
        return 2
    lams = args.lam if args.lam else list(DEFAULT_LAMBDAS)
    noise = NoiseModel(sigma_per_class=(1.0,), feature_sigma=1.0)
    offenders = []

    rows = []
    for lam in lams:
        exact = label_noise_exact(lam)
        mc = label_noise_mc(lam, noise, args.trials, args.seed)
        prob_ok = abs(mc.prob_smaller - exact.prob_smaller) <= PROB_TOLERANCE
        ratio_ok = abs(mc.magnitude_ratio - exact.magnitude_ratio) <= RATIO_TOLERANCE
        if not prob_ok:
            offenders.append(f"label-noise prob at lam={lam}")
        if not ratio_ok:
            offenders.append(f"label-noise ratio at lam={lam}")
        rows.append({
            "lam": lam,
            "closed_prob": exact.prob_smaller, "mc_prob": mc.prob_smaller,
            "closed_ratio": exact.magnitude_ratio, "mc_ratio": mc.magnitude_ratio,
            "prob_ok": prob_ok, "ratio_ok": ratio_ok,
        })

    bridge = bridge_ratio_mc(LinearGnnConfig(eta1=0.0, eta2=0.0, lam=0.5,
                                             trials=args.trials, seed=args.seed),
                             noise, tolerance=BRIDGE_TOLERANCE)
    if bridge.matched not in ("linear_denom", "squared_denom"):
        offenders.append(f"bridge ratio matched {bridge.matched!r}, expected exactly one candidate")
    eta_rows = []
    for eta in ETA_GRID:
        r = bridge_ratio_mc(LinearGnnConfig(eta1=eta, eta2=eta, lam=0.5,
                                            trials=args.trials, seed=args.seed),
                            noise, tolerance=BRIDGE_TOLERANCE)
        eta_rows.append({"eta": eta, "ratio": r.ratio})
    ratios = [r["ratio"] for r in eta_rows]
    monotone = all(a > b for a, b in zip(ratios, ratios[1:]))
    if not monotone:
        offenders.append("bridge ratio not decreasing over the eta grid")

    report = {
        "command": "verify-theorems",
        "config": _config_echo(args),
        "label_noise": {"rows": rows, "prob_tolerance": PROB_TOLERANCE,
                        "ratio_tolerance": RATIO_TOLERANCE},
        "bridge": {
            "empirical_ratio": bridge.ratio,
            "candidate_linear_denom": bridge.candidates.linear_denom,
            "candidate_squared_denom": bridge.candidates.squared_denom,
            "matched": bridge.matched,
            "tolerance": BRIDGE_TOLERANCE,
            "eta_grid": eta_rows,
            "monotone_decreasing": monotone,
        },
        "offenders": offenders,
        "passed": not offenders,
        "timing": {},
    }
    csv_rows = [{k: row[k] for k in ("lam", "closed_prob", "mc_prob",
                                     "closed_ratio", "mc_ratio")} for row in rows]
    _write_report(report, args.out, csv_rows, plot_theorem_report, args.no_plot)

    print(f"seed {args.seed}, trials {args.trials}")
    for row in rows:
        status = "ok" if row["prob_ok"] and row["ratio_ok"] else "FAIL"
        print(f"  lam={row['lam']:.2f}  prob {row['mc_prob']:.4f} vs {row['closed_prob']:.4f}"
              f"  ratio {row['mc_ratio']:.5f} vs {row['closed_ratio']:.5f}  [{status}]")
    print(f"  bridge ratio {bridge.ratio:.4f} -> matches {bridge.matched} "
          f"(candidates {bridge.candidates.linear_denom:.4f} / "
          f"{bridge.candidates.squared_denom:.4f})")
    if offenders:
        print("FAILED tolerances:", file=sys.stderr)
        for off in offenders:
            print(f"  - {off}", file=sys.stderr)
        return 3
    print("  all tolerances met")
    return 0


def cmd_madgap(args) -> int:
    from .plots import plot_madgap_study

    graph, table, split, gt = _load_for_run(args)
    depths = [int(x) for x in args.depths.split(",") if x]
    seeds = list(range(args.seed, args.seed + args.seeds))
    report = madgap_study(graph, table, split, gt, depths, seeds,
                          _train_cfg(args), _aug_cfg(args), _ens_cfg(args),
                          MadGapConfig(args.near_max, args.far_min))
    report["command"] = "madgap"
    report["config"] = _config_echo(args)
    rows = [{"seed": r["seed"], "depth": r["depth"],
             "baseline_madgap": r["baseline_madgap"],
             "augmented_madgap": r["augmented_madgap"]} for r in report["rows"]]
    _write_report(report, args.out, rows, plot_madgap_study, args.no_plot)
    print(f"depths={depths} seeds={seeds}")
    for depth in depths:
        base = np.mean([r["baseline_madgap"] for r in report["rows"] if r["depth"] == depth])
        aug = np.mean([r["augmented_madgap"] for r in report["rows"] if r["depth"] == depth])
        print(f"  depth {depth}: baseline {base:.4f}  augmented {aug:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intramix",
        description="Graph augmentation lab: mixup node synthesis, neighbor wiring, "
                    "ablations, and noise-theory verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a block-model dataset container")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=300)
    p.add_argument("--p-intra", type=float, default=0.014)
    p.add_argument("--p-inter", type=float, default=0.0014)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--labels-per-class", type=int, default=5)
    p.add_argument("--val-size", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, required=True, help="container directory to write")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run", help="paired baseline-vs-strategy experiment")
    p.add_argument("--strategy", type=str, default="intramix",
                   help=f"one of {', '.join(STRATEGIES)}")
    _add_io_flags(p, seeds_default=10)
    _add_train_flags(p)
    _add_aug_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-lambda", help="accuracy across fixed mixing weights")
    p.add_argument("--lambda-grid", type=str,
                   default="0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")
    _add_io_flags(p, seeds_default=10)
    _add_train_flags(p)
    _add_aug_flags(p)
    p.set_defaults(func=cmd_sweep_lambda)

    p = sub.add_parser("verify-theorems", help="Monte-Carlo noise-reduction checks")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--lambda", dest="lam", type=float, action="append",
                   help="mixing weight row (repeatable); default 0.1 0.3 0.5")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_verify_theorems)

    p = sub.add_parser("madgap", help="over-smoothing study across depths")
    p.add_argument("--depths", type=str, default="2,4,6,8")
    p.add_argument("--near-max", type=int, default=2)
    p.add_argument("--far-min", type=int, default=4)
    _add_io_flags(p, seeds_default=5)
    _add_train_flags(p)
    _add_aug_flags(p)
    p.set_defaults(func=cmd_madgap)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ContainerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
