"""Figure rendering for closed-loop runs; writes PNG files next to the data."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

FIGSIZE = (7.0, 4.5)
DPI = 150


def save_trajectory_figure(path, base_x: np.ndarray, base_u: np.ndarray, d: int):
    """State components and base inputs over base time, one panel each."""
    fig, (ax_x, ax_u) = plt.subplots(2, 1, sharex=True, figsize=FIGSIZE)
    ks = np.arange(base_x.shape[0])
    for i in range(base_x.shape[1]):
        ax_x.plot(ks, base_x[:, i], lw=1.2, label=f"x{i}")
    ax_x.set_ylabel("state")
    ax_x.legend(loc="upper right", fontsize=8)
    ax_x.grid(alpha=0.3)
    ku = np.arange(base_u.shape[0])
    for i in range(base_u.shape[1]):
        ax_u.step(ku, base_u[:, i], lw=1.2, where="post", label=f"u{i}")
    ax_u.set_ylabel("input")
    ax_u.set_xlabel(f"base step k (lifted blocks of d={d})")
    ax_u.legend(loc="upper right", fontsize=8)
    ax_u.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_envelope_figure(path, x: np.ndarray, w1: np.ndarray, env_gain: float, env_decay: float):
    """Squared state norm against the certified exponential envelope, with the
    one-step value function, on a log scale."""
    x2 = np.sum(x * x, axis=1)
    ts = np.arange(x2.shape[0])
    floor = np.finfo(float).tiny
    env = env_gain * np.power(env_decay, ts) * max(x2[0], floor)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogy(ts, np.maximum(x2, floor), lw=1.4, label="|x_t|^2")
    ax.semilogy(ts, np.maximum(env, floor), "k--", lw=1.2, label="certified envelope")
    w1_clean = np.asarray(w1, dtype=float)
    mask = np.isfinite(w1_clean) & (w1_clean > 0)
    if mask.any():
        ax.semilogy(ts[mask], w1_clean[mask], lw=1.0, alpha=0.8, label="W1(t)")
    ax.set_xlabel("lifted step t")
    ax.set_ylabel("value")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
