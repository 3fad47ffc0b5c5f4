"""PNG renderings of the reproduction data (matplotlib, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import io  # noqa: E402


def _wigner_ax(ax, path: Path, title: str):
    W = io.read_matrix(path)
    stem = path.with_suffix("")
    x = io.read_csv(f"{stem}_x.csv")[2][:, 0]
    p = io.read_csv(f"{stem}_p.csv")[2][:, 0]
    lim = np.abs(W).max()
    im = ax.imshow(W, origin="lower", extent=(x[0], x[-1], p[0], p[-1]), cmap="RdBu_r", vmin=-lim, vmax=lim)
    ax.set_xlabel("Re alpha")
    ax.set_ylabel("Im alpha")
    ax.set_title(title)
    return im


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_fig2(outdir: Path, data=None) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, tag, g1 in zip(axes, "ab", (0.01, 0.2)):
        im = _wigner_ax(ax, outdir / f"fig2{tag}_wigner.csv", f"g1 = {g1}")
        fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, outdir / "fig2.png")


def plot_fig3(outdir: Path, data=None) -> Path:
    _, cols, d = io.read_csv(outdir / "fig3_sweep.csv")
    c = {name: d[:, k] for k, name in enumerate(cols)}
    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    ax = axes[0, 0]
    ax.plot(c["g1"], c["G_over_K"], "o-")
    ax.axhline(1.0, ls="--", color="k", lw=0.8)
    ax.set_xlabel("g1")
    ax.set_ylabel("<G>/<K>")
    ax = axes[0, 1]
    ax.plot(c["g1"], c["g2"], "o-", color="C0")
    ax.set_xlabel("g1")
    ax.set_ylabel("g2(0)", color="C0")
    ax2 = ax.twinx()
    ax2.plot(c["g1"], c["n"], "s-", color="C1")
    ax2.set_ylabel("<n>", color="C1")
    ax = axes[1, 0]
    ax.semilogy(c["g1"], c["gamma_fit"], "o-", label="QRT fit")
    ax.semilogy(c["g1"], np.clip(c["gamma_formula"], 1e-6, None), "--", label="<K> - <G>")
    ax.set_xlabel("g1")
    ax.set_ylabel("linewidth")
    ax.legend()
    ax = axes[1, 1]
    _, scols, sd = io.read_csv(outdir / "fig3d_spectra.csv")
    for k in range(1, len(scols)):
        ax.plot(sd[:, 0], sd[:, k], label=scols[k].replace("S_", ""))
    ax.set_xlabel("omega - omega_s")
    ax.set_ylabel("S / max")
    ax.legend(fontsize=7)
    return _save(fig, outdir / "fig3.png")


def plot_fig4(outdir: Path, data=None) -> Path:
    _, cols, d = io.read_csv(outdir / "fig4_statistics.csv")
    c = {name: d[:, k] for k, name in enumerate(cols)}
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(c["r"], c["g2_numeric"], "o-", label="numeric")
    axes[0].plot(c["r"], c["g2_analytic"], "--", label="analytic")
    axes[0].set_ylabel("g2(0)")
    axes[1].plot(c["r"], c["n_numeric"], "o-", label="numeric")
    axes[1].plot(c["r"], c["n_analytic"], "--", label="analytic")
    axes[1].set_ylabel("<n>")
    for ax in axes:
        ax.set_xlabel("r")
        ax.legend()
    return _save(fig, outdir / "fig4.png")


def plot_fig5(outdir: Path, data=None) -> Path:
    _, cols, d = io.read_csv(outdir / "fig5b_variance.csv")
    c = {name: d[:, k] for k, name in enumerate(cols)}
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    im = _wigner_ax(axes[0], outdir / "fig5a_wigner.csv", "phi1 = pi/2")
    fig.colorbar(im, ax=axes[0], shrink=0.8)
    ax = axes[1]
    x = c["phi1"] / np.pi
    ax.plot(x, c["var_axis"], "o-", label="squeezing axis X_{theta/2}")
    ax.plot(x, c["var_min"], "s-", label="best quadrature")
    ax.plot(x, c["var_phi1"], "^-", label="X_phi1")
    ax.axhline(1.0, ls="--", color="k", lw=0.8, label="vacuum")
    ax.set_yscale("log")
    ax.set_xlabel("phi1 / pi")
    ax.set_ylabel("quadrature variance")
    ax.legend(fontsize=7)
    return _save(fig, outdir / "fig5.png")


PLOTTERS = {"fig2": plot_fig2, "fig3": plot_fig3, "fig4": plot_fig4, "fig5": plot_fig5}
