"""Figure rendering for the CLI report path (PNG files next to each CSV)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_pe_curve(rows: list[dict], path) -> None:
    """Pe vs E_b/N_0, one marker line per K_a value present in the rows."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    by_ka: dict = {}
    for r in rows:
        by_ka.setdefault(r["ka"], []).append(r)
    for ka, pts in sorted(by_ka.items(), key=lambda kv: str(kv[0])):
        pts = sorted(pts, key=lambda r: r["ebn0_db"])
        x = [r["ebn0_db"] for r in pts]
        y = [max(r["pe"], 1e-7) for r in pts]
        ax.semilogy(x, y, marker="o", label=f"$K_a$ = {ka}")
    ax.set_xlabel("$E_b/N_0$ (dB)")
    ax.set_ylabel("$P_e$")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_threshold_curve(rows: list[dict], path, target_pe: float) -> None:
    """Required E_b/N_0 vs K_a."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    pts = sorted(rows, key=lambda r: r["ka"])
    ax.plot([r["ka"] for r in pts], [r["ebn0_db"] for r in pts], marker="s")
    ax.set_xlabel("$K_a$")
    ax.set_ylabel(f"required $E_b/N_0$ (dB) for $P_e \\leq$ {target_pe:g}")
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_degree_histograms(rows: list[dict], path) -> None:
    """Check-node degree distributions before/after peeling, one panel per K_a."""
    ka_values = sorted({r["ka"] for r in rows})
    fig, axes = plt.subplots(1, len(ka_values), figsize=(3.2 * len(ka_values), 3.4),
                             squeeze=False)
    for ax, ka in zip(axes[0], ka_values):
        pts = sorted((r for r in rows if r["ka"] == ka), key=lambda r: r["degree"])
        deg = np.array([r["degree"] for r in pts])
        ax.bar(deg - 0.2, [r["before_mean"] for r in pts], width=0.4, label="pruned")
        ax.bar(deg + 0.2, [r["after_mean"] for r in pts], width=0.4, label="after peeling")
        ax.set_title(f"$K_a$ = {ka}")
        ax.set_xlabel("check-node degree")
        ax.set_ylabel("mean count")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_spectral_curve(rows: list[dict], path) -> None:
    """Throughput per resource element vs system load, with the no-spreading bound."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    pts = sorted(rows, key=lambda r: r["beta"])
    beta = [r["beta"] for r in pts]
    ax.plot(beta, [r["se_bits"] for r in pts], marker="o", label="constructions")
    ax.plot(beta, [r["cover_wyner"] for r in pts], linestyle="--", label="Cover-Wyner bound")
    for r in pts:
        ax.annotate(f"({r['gamma']},{r['rho']})", (r["beta"], r["se_bits"]),
                    textcoords="offset points", xytext=(4, -10), fontsize=7)
    ax.set_xlabel(r"system load $\beta$")
    ax.set_ylabel("bits / channel use")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_mapping(matrix: np.ndarray, path) -> None:
    """Spy plot of the user-to-resource incidence matrix."""
    fig, ax = plt.subplots(figsize=(7, 2.8))
    ax.spy(matrix, markersize=max(0.5, 90.0 / max(matrix.shape)), aspect="auto")
    ax.set_xlabel("users (columns)")
    ax.set_ylabel("resources")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
