"""Static figures for sweep results."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIGSIZE = (6.0, 4.2)


def _style(ax, ylabel):
    ax.set_xlabel("Number of relay antennas $N$")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, frameon=False)


def render_sweep(rows, figure: str, path) -> Path:
    """Monte Carlo markers with closed-form lines, one curve per parameter.

    ``figure`` is ``"fig1"`` (average SE per device against kappa) or
    ``"fig2"`` (sum SE against z).
    """
    path = Path(path)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    if figure == "fig2":
        keys = sorted({r.z for r in rows})
        select = lambda r: r.z  # noqa: E731
        label = "z={}"
    else:
        keys = sorted({r.kappa for r in rows})
        select = lambda r: r.kappa  # noqa: E731
        label = r"$\kappa$={}"
    for idx, key in enumerate(keys):
        color = f"C{idx}"
        curve = [r for r in rows if select(r) == key]
        ns = [r.n for r in curve]
        n_dev = round(curve[0].sum_se / curve[0].se_mc_mean) if figure == "fig2" else 1
        mc = [r.sum_se if figure == "fig2" else r.se_mc_mean for r in curve]
        err = [3 * r.se_mc_stderr * n_dev for r in curve]
        ax.errorbar(ns, mc, yerr=err, fmt="o", ms=4, color=color, label=label.format(key) + " (MC)")
        if all(r.se_lemma1 is not None for r in curve):
            ax.plot(ns, [r.se_lemma1 * n_dev for r in curve], "-", color=color, lw=1.2)
        if figure == "fig2" and all(r.se_corollary is not None for r in curve):
            ax.plot(ns, [r.se_corollary * n_dev for r in curve], ":", color=color, lw=0.9)
    if any(r.se_lemma1 is not None for r in rows):
        ax.plot([], [], "k-", lw=1.2, label="large-N approximation")
    ylabel = "Sum SE (bit/s/Hz)" if figure == "fig2" else "Average SE per device (bit/s/Hz)"
    _style(ax, ylabel)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
