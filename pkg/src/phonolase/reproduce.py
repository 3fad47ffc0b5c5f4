"""Data sets for the four figure reproductions (CSV + PNG + manifest)."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analytics, engine, io, observables as obs
from .config import DEFAULT_R, DEFAULT_TAIL
from .fock import TruncationWarning
from .model import DecayRates, DriveParams, EffectiveParams, LaserModel, drive_matching

log = logging.getLogger(__name__)

G2, GAMMA1, GAMMA2 = 0.15, 1.0, 2.5
FIG5_DRIVE = dict(gd1=0.015, gd2=0.009)
R_ASSUMPTION = f"squeezing amplitude r = {DEFAULT_R} assumed for the undriven figures"
FIGURES = ("fig2", "fig3", "fig4", "fig5")


def laser(g1: float, r: float = DEFAULT_R, drive: DriveParams | None = None, basis="squeezed") -> LaserModel:
    return LaserModel(EffectiveParams(g1, G2, r, 0.0), DecayRates(GAMMA1, GAMMA2), drive, basis=basis)


def base_params(**extra) -> dict:
    return {"g2": G2, "gamma1": GAMMA1, "gamma2": GAMMA2, **extra}


def _pool_map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- fig2: Wigner functions below and above threshold -----------------------


def wigner_panel(model: LaserModel, extent: float, points: int, n_max=None, start=8):
    ss, tail = engine.solve_adaptive(model, DEFAULT_TAIL, start=start, n_max=n_max)
    x = np.linspace(-extent, extent, points)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        grid = obs.wigner(ss.rho, ss.space, x, x)
    return grid, ss, tail


def fig2(outdir: Path, points: int = 121, **_):
    outdir = Path(outdir)
    files, summary = [], {}
    for tag, g1, extent in (("a", 0.01, 4.0), ("b", 0.2, 14.0)):
        model = laser(g1)
        grid, ss, tail = wigner_panel(model, extent, points)
        params = base_params(g1=g1, r=DEFAULT_R, n_max=ss.space.n_max)
        files += io.write_matrix(outdir / f"fig2{tag}_wigner.csv", grid.W, grid.x, grid.p, params, (R_ASSUMPTION,))
        summary[tag] = {
            "g1": g1,
            "n": obs.mean_phonon(ss.rho, ss.space),
            "normalization": grid.normalization(),
            "n_max": ss.space.n_max,
            "tail": tail,
        }
    return files, summary, {"a": None, "b": None}


# -- fig3: threshold, statistics, linewidth, spectra -------------------------


def spectrum_for(model: LaserModel, ss, n_points: int = 8001, span: float = 30.0):
    """Numeric spectrum with a window sized from the adiabatic linewidth."""
    G, K = obs.gain_loss_expect(ss.rho, ss.space, model.params, model.decay)
    est = max(K - G, 2e-4)
    tau_max = min(max(span / est, 50.0), 40000.0)
    L = model.liouvillian(ss.space)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", obs.SpectrumWarning)
        return obs.spectrum_numeric(ss.rho, L, tau_max, n_points), G, K


def _fig3_point(g1):
    model = laser(g1)
    ss, tail = engine.solve_adaptive(model, DEFAULT_TAIL)
    rho, space = ss.rho, ss.space
    spec, G, K = spectrum_for(model, ss)
    try:
        g2 = obs.g2_zero(rho, space)
    except obs.UndefinedObservable:
        g2 = math.nan
    return {
        "g1": g1,
        "ratio": G / K,
        "n": obs.mean_phonon(rho, space),
        "g2": g2,
        "gamma_formula": K - G,
        "gamma_fit": spec.gamma,
        "n_max": space.n_max,
        "tail": tail,
        "omega": spec.omega,
        "S": spec.S,
    }


def fig3(outdir: Path, g1_values=None, spectra_g1=(0.06, 0.1, 0.12, 0.15, 0.2), jobs: int = 1, **_):
    outdir = Path(outdir)
    g1_values = np.linspace(0.01, 0.3, 30) if g1_values is None else np.asarray(g1_values)
    g1_all = sorted(set(np.round(g1_values, 12)) | set(spectra_g1))
    pts = _pool_map(_fig3_point, g1_all, jobs)
    by_g1 = {round(p["g1"], 12): p for p in pts}
    rows = [[by_g1[round(g, 12)][k] for k in ("g1", "ratio", "n", "g2", "gamma_formula", "gamma_fit", "n_max", "tail")]
            for g in g1_values]
    params = base_params(r=DEFAULT_R)
    files = [io.write_csv(outdir / "fig3_sweep.csv",
                          ["g1", "G_over_K", "n", "g2", "gamma_formula", "gamma_fit", "n_max", "tail"],
                          rows, params, (R_ASSUMPTION,),
                          {"note": "gamma_formula = <K> - <G> with rate normalisation 4"})]
    omega = np.linspace(-0.05, 0.05, 401)
    cols, spectra = ["omega"], []
    for g in spectra_g1:
        p = by_g1[round(g, 12)]
        S = np.interp(omega, p["omega"], p["S"])
        spectra.append(S / S.max())
        cols.append(f"S_g1_{g:g}")
    files.append(io.write_csv(outdir / "fig3d_spectra.csv", cols, np.column_stack([omega, *spectra]),
                              params, (R_ASSUMPTION,), {"normalisation": "each spectrum divided by its maximum"}))
    ratios = np.array([r[1] for r in rows])
    summary = {
        "max_ratio": float(ratios.max()),
        "crosses_unity": bool(np.any(ratios > 1)),
        "steepest_rise_g1": analytics.steepest_rise(g1_values, [r[2] for r in rows]),
    }
    return files, summary, {"rows": rows, "omega": omega, "spectra": spectra, "spectra_g1": spectra_g1}


# -- fig4: statistics versus squeezing --------------------------------------


def _fig4_point(r):
    model = laser(0.2, r)
    ss, tail = engine.solve_adaptive(model, DEFAULT_TAIL)
    rho, space = ss.rho, ss.space
    n_b = obs.squeezed_frame_moments(rho, space, r, 0.0)[0]
    return [r, obs.mean_phonon(rho, space), obs.g2_zero(rho, space), n_b,
            analytics.analytic_n(n_b, r), analytics.analytic_g2(n_b, r), space.n_max, tail]


def fig4(outdir: Path, r_values=None, jobs: int = 1, **_):
    outdir = Path(outdir)
    r_values = np.linspace(0.0, 1.2, 13) if r_values is None else np.asarray(r_values)
    rows = _pool_map(_fig4_point, list(r_values), jobs)
    files = [io.write_csv(outdir / "fig4_statistics.csv",
                          ["r", "n_numeric", "g2_numeric", "n_b", "n_analytic", "g2_analytic", "n_max", "tail"],
                          rows, base_params(g1=0.2),
                          extra={"note": "analytic columns use the measured <b^dag b> as |alpha_s|^2"})]
    last = rows[-1]
    summary = {"r_max": last[0], "g2_analytic_at_r_max": last[5], "g2_numeric_at_r_max": last[2]}
    return files, summary, {"rows": rows}


# -- fig5: driven phase locking and quadrature squeezing --------------------


def _fig5_drive(phi1: float, theta: float = 0.0) -> DriveParams:
    return DriveParams(FIG5_DRIVE["gd1"], FIG5_DRIVE["gd2"], phi1, -phi1 - theta)


def fig5_point(phi1: float, n_max: int | None = None, start: int = 48):
    drive = _fig5_drive(phi1)
    r, theta = drive_matching(drive)
    model = laser(0.2, r, drive)
    ss, tail = engine.solve_adaptive(model, DEFAULT_TAIL, start=start, n_max=n_max)
    rho, space = ss.rho, ss.space
    angles = np.linspace(0.0, np.pi, 721)
    curve = obs.quadrature_variance(rho, space, angles)
    k = int(np.argmin(curve))
    return {
        "phi1": phi1,
        "var_phi1": obs.quadrature_variance(rho, space, phi1),
        "var_axis": obs.quadrature_variance(rho, space, theta / 2),
        "var_min": float(curve[k]),
        "min_angle": float(angles[k]),
        "abs_a": abs(obs.mode_amplitude(rho, space)),
        "n": obs.mean_phonon(rho, space),
        "n_max": space.n_max,
        "tail": tail,
    }


def _fig5_task(phi1):
    return fig5_point(phi1)


def fig5(outdir: Path, n_phi: int = 32, jobs: int = 1, points: int = 121, **_):
    outdir = Path(outdir)
    phis = list(2 * np.pi * np.arange(n_phi) / n_phi)
    res = _pool_map(_fig5_task, phis, jobs)
    cols = ["phi1", "var_phi1", "var_axis", "var_min", "min_angle", "abs_a", "n", "n_max", "tail"]
    rows = [[p[c] for c in cols] for p in res]
    r, theta = drive_matching(_fig5_drive(0.0))
    params = base_params(g1=0.2, r=r, theta=theta, **FIG5_DRIVE, phi2="-phi1")
    extra = {
        "var_phi1": "variance of X_phi1 = a e^{-i phi1} + h.c.",
        "var_axis": "variance of the fixed squeezing-axis quadrature X_{theta/2}",
        "var_min": "minimum over all quadrature angles",
        "vacuum_level": 1.0,
    }
    files = [io.write_csv(outdir / "fig5b_variance.csv", cols, rows, params, extra=extra)]
    model = laser(0.2, r, _fig5_drive(np.pi / 2))
    grid, ss, _ = wigner_panel(model, 14.0, points, start=48)
    files += io.write_matrix(outdir / "fig5a_wigner.csv", grid.W, grid.x, grid.p,
                             {**params, "phi1": np.pi / 2, "n_max": ss.space.n_max})
    axis = np.array([p["var_axis"] for p in res])
    summary = {
        "min_var_axis": float(axis.min()),
        "argmin_var_axis_over_pi": [float(phis[k] / np.pi) for k in _local_minima(axis)],
        "min_var_phi1": float(min(p["var_phi1"] for p in res)),
        "sub_vacuum": bool(axis.min() < 1),
    }
    return files, summary, {"rows": rows, "grid": grid}


def _local_minima(y) -> list[int]:
    y = np.asarray(y)
    n = y.size
    return [k for k in range(n) if y[k] <= y[(k - 1) % n] and y[k] <= y[(k + 1) % n]]


RUNNERS = {"fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5}


def reproduce(figure: str, outdir, jobs: int = 1, plot: bool = True, **options) -> dict:
    """Write the CSVs (and PNG) for one figure and update ``manifest.json``."""
    if figure not in RUNNERS:
        raise ValueError(f"unknown figure {figure!r}; choose from {FIGURES}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        files, summary, data = RUNNERS[figure](outdir, jobs=jobs, **options)
    except Exception as exc:
        raise RuntimeError(f"{figure} failed: {exc}") from exc
    if plot:
        from . import plotting

        files.append(plotting.PLOTTERS[figure](outdir, data))
    manifest_path = outdir / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        import json

        manifest = json.loads(manifest_path.read_text())
    manifest["version"] = __version__
    manifest.setdefault("figures", {})[figure] = {
        "files": sorted(str(Path(f).name) for f in files),
        "parameters": base_params(),
        "assumptions": [R_ASSUMPTION] if figure in ("fig2", "fig3") else [],
        "summary": summary,
    }
    io.write_json(manifest_path, manifest)
    return manifest["figures"][figure]
