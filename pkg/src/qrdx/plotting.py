"""Figure rendering for the report path. Uses the Agg backend so runs never
need a display; every helper writes a PNG next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_roc(fpr, tpr, auc: float, method: str, path) -> Path:
    """One ROC curve with its area in the legend."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(fpr, tpr, lw=1.8, label=f"{method} (AUC {auc:.3f})")
        ax.plot([0, 1], [0, 1], ls="--", c="grey", lw=1.0, label="random")
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.legend(loc="lower right")
        return _save(fig, path)


def plot_training_curves(history: list, method: str, path) -> Path:
    """Train/validation loss totals (and components) over epochs."""
    epochs = [row["epoch"] for row in history]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(epochs, [r["train_total"] for r in history], label="train")
        ax.plot(epochs, [r["val_total"] for r in history], label="validation")
        comp_keys = sorted(k for k in history[0] if k.startswith("train_") and k != "train_total")
        for key in comp_keys:
            ax.plot(epochs, [r[key] for r in history], lw=0.9, ls=":",
                    label=key.removeprefix("train_"))
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.set_title(method)
        ax.set_yscale("log")
        ax.legend(fontsize=8)
        return _save(fig, path)


def plot_benchmark(rows: list, path) -> Path:
    """AUC per method with subset-spread error bars."""
    scored = [r for r in rows if r.get("auc_mean") is not None]
    if not scored:
        return None
    names = [r["method"] for r in scored]
    means = [r["auc_mean"] for r in scored]
    stds = [r["auc_std"] for r in scored]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(6.4, 0.8 * len(names)), 4.2))
        xs = range(len(names))
        ax.bar(xs, means, yerr=stds, capsize=3, color="#4878a8")
        ax.axhline(0.5, ls="--", c="grey", lw=1.0)
        ax.set_xticks(list(xs))
        ax.set_xticklabels(names, rotation=45, ha="right")
        ax.set_ylabel("kernel classifier AUC")
        ax.set_ylim(0.0, 1.0)
        return _save(fig, path)
