"""Figure rendering for CLI reports.

Each report writer has a matching plot function that drops a PNG next
to the JSON/CSV output.  Figures are a convenience view of the same
numbers; the delimited files remain the machine-readable record.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = [
    "plot_run_report",
    "plot_lambda_sweep",
    "plot_madgap_study",
    "plot_theorem_report",
]


def _finish(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_run_report(report: dict, path) -> None:
    """Paired per-seed accuracies, baseline vs augmented."""
    seeds = [r["seed"] for r in report["per_seed"]]
    base = [r["baseline_accuracy"] for r in report["per_seed"]]
    aug = [r["augmented_accuracy"] for r in report["per_seed"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    x = range(len(seeds))
    ax.plot(x, base, "o-", label="baseline")
    ax.plot(x, aug, "s-", label=report["strategy"])
    ax.set_xticks(list(x), [str(s) for s in seeds])
    ax.set_xlabel("seed")
    ax.set_ylabel("test accuracy")
    ax.set_title(f"{report['strategy']}: {report['gain']:+.4f} mean gain")
    ax.legend()
    _finish(fig, Path(path))


def plot_lambda_sweep(report: dict, path) -> None:
    lams = [r["lam"] for r in report["rows"]]
    acc = [r["accuracy"]["mean"] for r in report["rows"]]
    std = [r["accuracy"]["std"] for r in report["rows"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(lams, acc, yerr=std, fmt="o-", label="augmented accuracy")
    ax.axhline(report["baseline"]["mean"], color="gray", ls="--", label="baseline")
    ax.set_xlabel("mixing weight")
    ax.set_ylabel("test accuracy")
    ax.legend()
    _finish(fig, Path(path))


def plot_madgap_study(report: dict, path) -> None:
    depths = sorted(report["depths"])
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, label, marker in (("baseline_madgap", "baseline", "o"),
                               ("augmented_madgap", "augmented", "s")):
        means = []
        for d in depths:
            vals = [r[key] for r in report["rows"] if r["depth"] == d]
            means.append(sum(vals) / len(vals))
        ax.plot(depths, means, marker + "-", label=label)
    ax.set_xlabel("layers")
    ax.set_ylabel("near/far cosine-distance gap")
    ax.legend()
    _finish(fig, Path(path))


def plot_theorem_report(report: dict, path) -> None:
    rows = report["label_noise"]["rows"]
    lams = [r["lam"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(lams, [r["closed_prob"] for r in rows], "o-", label="closed form")
    ax1.plot(lams, [r["mc_prob"] for r in rows], "x--", label="monte carlo")
    ax1.set_xlabel("mixing weight")
    ax1.set_ylabel("P(|mixed| < |fresh|)")
    ax1.legend()
    ax2.plot(lams, [r["closed_ratio"] for r in rows], "o-", label="closed form")
    ax2.plot(lams, [r["mc_ratio"] for r in rows], "x--", label="monte carlo")
    ax2.set_xlabel("mixing weight")
    ax2.set_ylabel("E|mixed| / E|fresh|")
    ax2.legend()
    _finish(fig, Path(path))
