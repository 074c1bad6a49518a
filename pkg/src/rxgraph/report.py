"""Matplotlib figure rendering for the CLI report paths (Agg, file output)."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def training_figure(log: dict, path) -> str:
    """Loss curve (and dev F1 when present) over epochs."""
    epochs = [e["epoch"] for e in log["epochs"]]
    losses = [e["mean_loss"] for e in log["epochs"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, losses, marker="o", color="tab:blue", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    if any("dev_f1" in e for e in log["epochs"]):
        ax2 = ax.twinx()
        ax2.plot(epochs, [e.get("dev_f1", float("nan")) for e in log["epochs"]],
                 marker="s", color="tab:orange", label="dev F1")
        ax2.set_ylabel("dev F1@5")
        ax2.set_ylim(0, 1)
    best = log.get("best_epoch")
    if best and best > 0:
        ax.axvline(best, color="gray", linestyle=":", linewidth=1)
    ax.set_title("training")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def evaluation_figure(result, path) -> str:
    """Per-patient F1 histogram plus mean-metric bars."""
    f1 = [row["f1"] for row in result.rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.hist(f1, bins=np.linspace(0, 1, 11), color="tab:blue",
             edgecolor="white")
    ax1.set_xlabel(f"F1@{result.k}")
    ax1.set_ylabel("patients")
    ax1.set_title("per-patient F1")
    names = ["jaccard", "precision", "recall", "f1", "ddi_rate"]
    values = [result.means[n] for n in names]
    ax2.bar(names, values, color="tab:orange")
    ax2.set_ylim(0, 1)
    ax2.set_title("means")
    ax2.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def audit_figure(audit: dict, patients, path) -> str:
    """Age pyramid and quota target-vs-measured bars for a generated set."""
    ages = [p.age for p in patients]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.hist(ages, bins=np.arange(0, 105, 5), color="tab:green",
             edgecolor="white")
    ax1.set_xlabel("age")
    ax1.set_ylabel("patients")
    ax1.set_title("age distribution")
    quotas = audit["quotas"]
    names = list(quotas)
    x = np.arange(len(names))
    ax2.bar(x - 0.2, [quotas[n]["target"] for n in names], width=0.4,
            label="target", color="tab:blue")
    ax2.bar(x + 0.2, [quotas[n]["measured"] for n in names], width=0.4,
            label="measured", color="tab:orange")
    ax2.set_xticks(x, names, rotation=30)
    ax2.set_title("population quotas")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def render_all(out_dir, train_log=None, eval_result=None, audit=None,
               patients=None) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if train_log is not None:
        written.append(training_figure(train_log, out / "training.png"))
    if eval_result is not None:
        written.append(evaluation_figure(eval_result, out / "evaluation.png"))
    if audit is not None and patients is not None:
        written.append(audit_figure(audit, patients, out / "benchmark.png"))
    return written
