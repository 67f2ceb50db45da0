"""SVG figure output for the CLI (convenience layer; no acceptance weight)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "housebench"

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def predicted_vs_actual(actual, predictions: dict[str, list[float]], path) -> None:
    """Line plot of actual vs per-model predicted log prices for the first
    test properties."""
    fig, ax = plt.subplots(figsize=(9, 5))
    x = range(1, len(actual) + 1)
    ax.plot(x, actual, "k-o", label="actual", linewidth=2)
    for family, preds in sorted(predictions.items()):
        ax.plot(x, preds, marker=".", label=family)
    ax.set_xlabel("test property")
    ax.set_ylabel("log price")
    ax.set_title("Predicted vs actual prices (first test properties)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def loss_curve(history, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    epochs = range(1, len(history) + 1)
    ax.plot(epochs, [h[0] for h in history], label="train loss")
    ax.plot(epochs, [h[1] for h in history], label="validation MSE")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("Neural network training history")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def importance_bars(entries, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 0.35 * max(len(entries), 4) + 1.5))
    names = [e.feature for e in entries][::-1]
    values = [e.delta_mse for e in entries][::-1]
    ax.barh(names, values)
    ax.set_xlabel("increase in MSE after permutation")
    ax.set_title("Permutation feature importance")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def pdp_curves(curves: dict[str, list[tuple[float, float]]], path) -> None:
    fig, axes = plt.subplots(1, len(curves), figsize=(4.5 * len(curves), 4))
    if len(curves) == 1:
        axes = [axes]
    for ax, (feature, curve) in zip(axes, curves.items()):
        ax.plot([v for v, _ in curve], [p for _, p in curve], "-o", markersize=3)
        ax.set_xlabel(feature)
        ax.set_ylabel("mean predicted log price")
    fig.suptitle("Partial dependence (marginal effects)")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
