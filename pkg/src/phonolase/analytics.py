"""Closed-form statistics, threshold search, adiabatic predictions and spectral fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import curve_fit

from . import fock
from .fock import TruncationWarning
from .model import DecayRates, EffectiveParams, LaserModel
from .observables import SpectrumResult, gain_loss_expect, lorentzian


class NoSignChange(ValueError):
    """The bracket does not straddle the requested gain/loss ratio."""


class NonLorentzian(ValueError):
    pass


class AdiabaticityWarning(UserWarning):
    pass


# -- Eqs. for <n> and g2(0) of a squeezed coherent state with random phase --


def analytic_n(alpha_s_sq, r):
    """``<n> = |alpha_s|^2 cosh 2r + sinh^2 r``."""
    alpha_s_sq = np.asarray(alpha_s_sq, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(alpha_s_sq < 0) or np.any(r < 0):
        raise ValueError("alpha_s_sq and r must be >= 0")
    out = alpha_s_sq * np.cosh(2 * r) + np.sinh(r) ** 2
    return float(out) if out.ndim == 0 else out


def analytic_g2(alpha_s_sq, r):
    """Zero-delay coherence of the phase-averaged squeezed coherent state."""
    A = np.asarray(alpha_s_sq, dtype=float)
    r = np.asarray(r, dtype=float)
    n = np.asarray(analytic_n(A, r))
    if np.any(n <= 0):
        raise ValueError("g2(0) undefined at alpha_s_sq = r = 0")
    c2 = np.cosh(2 * r)
    # the closed-form bracket minus 4 n^2, factored to avoid cancellation:
    # exactly 1 at r = 0 and 3 + 1/sinh^2 r at A = 0
    excess = np.sinh(r) ** 2 * (A**2 * (c2 + 1) + 2 * A * (2 * c2 + 1) + c2)
    out = 1 + excess / n**2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LaserStatistics:
    alpha_s_sq: float
    r: float
    n_pred: float
    g2_pred: float

    @classmethod
    def from_frame(cls, alpha_s_sq: float, r: float) -> "LaserStatistics":
        return cls(alpha_s_sq, r, analytic_n(alpha_s_sq, r), analytic_g2(alpha_s_sq, r))


def brute_force_moments(
    alpha_s: complex,
    r: float,
    theta: float = 0.0,
    n_max: int = 320,
    n_phase: int = 64,
) -> tuple[float, float]:
    """``(<n>, g2(0))`` of ``mean_phi S D(alpha_s e^{i phi})|0><0| D^dag S^dag``.

    States are built as vectors: the coherent amplitudes are exact and the
    squeeze acts through a Krylov exponential of the sparse generator on
    ``n_max`` levels, so the only approximation is the cutoff (checked).
    """
    if n_phase < 64:
        raise ValueError("use at least 64 phase points")
    A = fock.ladder(n_max)
    Ad = A.getH().tocsr()
    gen = (0.5 * r * (np.exp(-1j * theta) * (A @ A) - np.exp(1j * theta) * (Ad @ Ad))).tocsc()
    k = np.arange(n_max)
    log_fact = np.array([math.lgamma(j + 1) for j in k])
    nn = k.astype(float)
    fall2 = nn * (nn - 1)
    n_sum = f2_sum = 0.0
    tail = 0.0
    for phi in 2 * np.pi * np.arange(n_phase) / n_phase:
        beta = alpha_s * np.exp(1j * phi)
        if beta == 0:
            coh = (k == 0).astype(complex)
        else:
            mag = np.exp(-0.5 * abs(beta) ** 2 + k * np.log(abs(beta)) - 0.5 * log_fact)
            coh = mag * np.exp(1j * k * np.angle(beta))
        psi = spla.expm_multiply(gen, coh) if r else coh
        p = np.abs(psi) ** 2
        tail = max(tail, p[-10:].sum())
        n_sum += p @ nn
        f2_sum += p @ fall2
    if tail > 1e-12:
        warnings.warn(f"cutoff n_max={n_max} leaves population {tail:.1e} at the top", TruncationWarning, stacklevel=2)
    n = n_sum / n_phase
    if n == 0:
        return 0.0, float("nan")
    return n, (f2_sum / n_phase) / n**2


# -- threshold ------------------------------------------------------------


@dataclass
class ThresholdResult:
    g1_th: float
    bracket: tuple[float, float]
    n_solves: int
    level: float = 1.0
    evaluations: list[tuple[float, float]] = field(default_factory=list)
    cutoffs: list[int] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        pts = sorted(self.evaluations)
        return all(b[1] >= a[1] for a, b in zip(pts, pts[1:]))


def steady_ratio(
    g1: float,
    g2: float,
    gamma: DecayRates,
    r: float = 0.0,
    theta: float = 0.0,
    target_tail: float = 1e-6,
    n_max: int | None = None,
    basis: str = "squeezed",
):
    """``(<G>/<K>, n_max used)`` of the undriven steady state."""
    from .engine import solve_adaptive

    model = LaserModel(EffectiveParams(g1, g2, r, theta), gamma, basis=basis)
    ss, _ = solve_adaptive(model, target_tail, n_max=n_max)
    G, K = gain_loss_expect(ss.rho, ss.space, model.params, gamma)
    return G / K, ss.space.n_max


def find_threshold(
    g2: float,
    gamma1: float = 1.0,
    gamma2: float = 1.0,
    r: float = 0.0,
    bracket: tuple[float, float] = (0.05, 0.3),
    level: float = 1.0,
    rel_width: float = 1e-3,
    target_tail: float = 1e-6,
    n_max: int | None = None,
    theta: float = 0.0,
) -> ThresholdResult:
    """Bisect ``g1`` for ``<G>/<K> = level`` on the full steady state."""
    gamma = DecayRates(gamma1, gamma2)
    lo, hi = map(float, bracket)
    if not 0 <= lo < hi:
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    evals, cuts = [], []

    def f(g1):
        ratio, n = steady_ratio(g1, g2, gamma, r, theta, target_tail, n_max)
        evals.append((g1, ratio))
        cuts.append(n)
        return ratio - level

    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi > 0 or f_lo == f_hi == 0:
        ratios = [v for _, v in evals]
        raise NoSignChange(
            f"<G>/<K> - {level:g} has the same sign at g1={lo:g} ({ratios[0]:.4f}) "
            f"and g1={hi:g} ({ratios[1]:.4f})"
        )
    while hi - lo > rel_width * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0:
            lo = hi = mid
            break
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), len(evals), level, evals, cuts)


def small_signal_threshold(g2: float, gamma1: float, gamma2: float) -> float:
    """``g1`` where gain equals loss with both ions in the ground state."""
    return g2 * math.sqrt(gamma1 / gamma2)


def steepest_rise(x, y) -> float:
    """Midpoint of the steepest finite-difference segment of ``y(x)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope = np.diff(y) / np.diff(x)
    k = int(np.argmax(slope))
    return float(0.5 * (x[k] + x[k + 1]))


# -- adiabatic elimination ------------------------------------------------


def adiabaticity(p: EffectiveParams, gamma: DecayRates) -> float:
    """``min_i gamma_i / g_i`` over the coupled ions (inf if none couples)."""
    ratios = [gm / g for g, gm in ((p.g1, gamma.gamma1), (p.g2, gamma.gamma2)) if g > 0]
    return min(ratios) if ratios else math.inf


def adiabatic_prediction(p: EffectiveParams, gamma: DecayRates, rho_ss, space):
    """``(Gamma_pred, <G>, <K>)`` with the calibrated rate normalisation."""
    if adiabaticity(p, gamma) < 10:
        warnings.warn(
            f"adiabatic elimination needs gamma_i >> g_i (min ratio {adiabaticity(p, gamma):.2g})",
            AdiabaticityWarning,
            stacklevel=2,
        )
    G, K = gain_loss_expect(rho_ss, space, p, gamma)
    return K - G, G, K


# -- spectra --------------------------------------------------------------


def _half_width_guess(omega, S) -> float:
    k0 = int(np.argmax(S))
    half = S[k0] / 2
    right = np.flatnonzero(S[k0:] < half)
    if right.size:
        return max(float(omega[k0 + right[0]] - omega[k0]), float(np.min(np.diff(omega))))
    return float(omega[-1] - omega[k0]) / 2


def fit_lorentzian(s: SpectrumResult, window: float = 20.0) -> tuple[float, float, float]:
    """Least-squares ``A / (w^2 + G^2/4)`` fit; returns ``(n_ss_fit, Gamma_fit, residual)``.

    The fit uses ``|w| <= window * HWHM`` around the peak. ``residual`` is the
    largest deviation relative to the peak. For ``"fourier"`` spectra the
    amplitude is ``n G``, otherwise ``n``.
    """
    omega = np.asarray(s.omega, dtype=float)
    S = np.asarray(s.S, dtype=float)
    peak = float(S.max())
    if peak <= 0:
        raise NonLorentzian("spectrum has no positive peak")
    hw = _half_width_guess(omega, S)
    w0 = float(omega[np.argmax(S)])
    mask = np.abs(omega - w0) <= window * hw
    if mask.sum() < 5:
        mask = np.ones_like(omega, dtype=bool)

    def model(w, amp, gam):
        return lorentzian(w - w0, amp, gam)

    p0 = (peak * hw**2, 2 * hw)
    try:
        (amp, gam), _ = curve_fit(
            model, omega[mask], S[mask], p0=p0, xtol=1e-14, ftol=1e-14, maxfev=20000
        )
    except RuntimeError as exc:
        raise NonLorentzian(f"Lorentzian fit failed: {exc}") from exc
    gam = abs(gam)
    resid = float(np.max(np.abs(model(omega[mask], amp, gam) - S[mask])) / peak)
    if resid > 0.2:
        raise NonLorentzian(f"Lorentzian fit residual {resid:.0%} of the peak")
    n_fit = amp / gam if s.convention == "fourier" else amp
    return float(n_fit), float(gam), resid
