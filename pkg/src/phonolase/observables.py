"""Physical quantities computed from density matrices and Liouvillians.

All functions take the state together with the :class:`~phonolase.fock.HilbertSpace`
it is expressed in; operators are rebuilt in that space's mode basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import fock
from .fock import HilbertSpace, TruncationWarning
from .model import DecayRates, EffectiveParams

# Prefactor turning the adiabatic gain/decay operators into the full-width
# linewidth of the phonon spectrum. Re-deriving the spin elimination gives an
# amplitude gain 2 g1^2/gamma1 (decay 2 g2^2/gamma2), i.e. a FWHM of
# 4 (g2^2/gamma2 - g1^2/gamma1) for ground-state ions; QRT fits confirm it.
RATE_NORMALIZATION = 4.0


class UndefinedObservable(ValueError):
    pass


class LinewidthWarning(UserWarning):
    pass


class SpectrumWarning(UserWarning):
    pass


class WignerCoverageWarning(UserWarning):
    pass


def _ops(space: HilbertSpace):
    a = fock.annihilation_op(space)
    return a, a.getH().tocsr()


def mean_phonon(rho: np.ndarray, space: HilbertSpace) -> float:
    return fock.expectation(fock.number_op(space), rho).real


def mode_amplitude(rho: np.ndarray, space: HilbertSpace) -> complex:
    """``<a>`` of the lab-frame mode."""
    a, _ = _ops(space)
    return fock.expectation(a, rho)


def g2_zero(rho: np.ndarray, space: HilbertSpace) -> float:
    a, ad = _ops(space)
    n = fock.expectation(ad @ a, rho).real
    if n < 1e-14:
        raise UndefinedObservable("g2(0) is undefined for a state with <n> = 0")
    return fock.expectation(ad @ ad @ a @ a, rho).real / n**2


def spin_z(rho: np.ndarray, space: HilbertSpace) -> tuple[float, float]:
    return tuple(fock.expectation(fock.spin_ops(space, i)[2], rho).real for i in (1, 2))


def gain_loss_from_spins(sz1: float, sz2: float, p: EffectiveParams, gamma: DecayRates):
    G = -RATE_NORMALIZATION * p.g1**2 / gamma.gamma1 * sz1
    K = -RATE_NORMALIZATION * p.g2**2 / gamma.gamma2 * sz2
    return G, K


def gain_loss_expect(rho, space: HilbertSpace, p: EffectiveParams, gamma: DecayRates):
    """``(<G>, <K>)`` including :data:`RATE_NORMALIZATION`; the ratio is prefactor-free."""
    return gain_loss_from_spins(*spin_z(rho, space), p, gamma)


def linewidth(G: float, K: float) -> float:
    """``Gamma = <K> - <G>``; negative values (gain exceeding loss) are flagged."""
    gam = K - G
    if gam < 0:
        warnings.warn(f"negative linewidth {gam:.3g}: gain exceeds loss", LinewidthWarning, stacklevel=2)
    return gam


# -- spectra --------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumResult:
    """Spectral density on a symmetric grid around the rotating-frame origin.

    ``convention`` is ``"lorentzian"`` for ``S = n / (w^2 + G^2/4)`` or
    ``"fourier"`` for the transform of ``<a^dag(tau) a(0)>`` normalised so that
    ``int S dw / 2pi = n_ss`` (a Lorentzian ``n G / (w^2 + G^2/4)``).
    """

    omega: np.ndarray
    S: np.ndarray
    n_ss: float
    gamma: float
    convention: str = "lorentzian"
    residual: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.omega)
        if not np.allclose(w, -w[::-1], atol=1e-12 * max(1.0, np.abs(w).max())):
            raise ValueError("spectrum grid must be symmetric about 0")
        if self.convention not in ("lorentzian", "fourier"):
            raise ValueError(f"unknown spectrum convention {self.convention!r}")

    def normalized(self) -> np.ndarray:
        return self.S / np.max(self.S)

    def integral(self) -> float:
        """``int S dw / 2pi`` by the trapezoid rule."""
        return float(np.trapezoid(self.S, self.omega) / (2 * np.pi))


def lorentzian(omega, n_ss: float, gamma: float) -> np.ndarray:
    return n_ss / (np.asarray(omega) ** 2 + gamma**2 / 4)


def lorentzian_spectrum(n_ss: float, gamma: float, omega) -> SpectrumResult:
    if not gamma > 0:
        raise ValueError(f"linewidth must be positive, got {gamma}")
    omega = np.asarray(omega, dtype=float)
    return SpectrumResult(omega, lorentzian(omega, n_ss, gamma), n_ss, gamma, "lorentzian")


def correlation_to_spectrum(tau, corr, pad: int = 4):
    """``S(w) = 2 Re int_0^T c(tau) e^{-i w tau} dtau`` on a symmetric FFT grid."""
    tau = np.asarray(tau, dtype=float)
    corr = np.asarray(corr, dtype=complex)
    dt = tau[1] - tau[0]
    w = np.ones(tau.size)
    w[0] = w[-1] = 0.5
    m = 1 << int(np.ceil(np.log2(pad * tau.size)))
    F = np.fft.fft(corr * w, m) * dt
    S = 2 * np.fft.fftshift(F).real
    omega = np.fft.fftshift(np.fft.fftfreq(m, dt)) * 2 * np.pi
    # drop the unpaired Nyquist bin so the grid is symmetric
    return omega[1:], S[1:]


def spectrum_numeric(rho_ss, L, tau_max: float, n_points: int = 4001, fit: bool = True) -> SpectrumResult:
    """Phonon spectrum from ``<a^dag(tau) a(0)>`` via the quantum regression theorem."""
    from .analytics import NonLorentzian, fit_lorentzian
    from .engine import two_time_corr

    space = L.space
    a, ad = _ops(space)
    tau = np.linspace(0.0, tau_max, n_points)
    c = two_time_corr(ad, a, rho_ss, L, tau).values
    if abs(c[-1]) > 1e-3 * abs(c[0]):
        warnings.warn(
            f"correlation window truncated: |c(tau_max)|/|c(0)| = {abs(c[-1]) / abs(c[0]):.1e}",
            SpectrumWarning,
            stacklevel=2,
        )
    omega, S = correlation_to_spectrum(tau, c)
    n_ss = mean_phonon(rho_ss, space)
    res = SpectrumResult(omega, S, n_ss, np.nan, "fourier")
    if not fit:
        return res
    try:
        n_fit, gam, resid = fit_lorentzian(res)
    except NonLorentzian as exc:
        warnings.warn(str(exc), SpectrumWarning, stacklevel=2)
        return res
    return SpectrumResult(omega, S, n_ss, gam, "fourier", resid)


# -- phase space ----------------------------------------------------------


def mode_moments(rho, space: HilbertSpace) -> dict[str, complex]:
    a, ad = _ops(space)
    return {
        "a": fock.expectation(a, rho),
        "aa": fock.expectation(a @ a, rho),
        "ada": fock.expectation(ad @ a, rho).real,
        "aad": fock.expectation(a @ ad, rho).real,
    }


def quadrature_variance(rho, space: HilbertSpace, phi) -> np.ndarray | float:
    """Variance of ``X_phi = a e^{-i phi} + a^dag e^{i phi}`` (vacuum gives 1)."""
    m = mode_moments(rho, space)
    phi_arr = np.asarray(phi, dtype=float)
    e = np.exp(-1j * phi_arr)
    x2 = 2 * np.real(e**2 * m["aa"]) + m["ada"] + m["aad"]
    x1 = 2 * np.real(e * m["a"])
    out = x2 - x1**2
    return float(out) if out.ndim == 0 else out


def squeezed_frame_moments(rho, space: HilbertSpace, r: float, theta: float = 0.0):
    """``(<b^dag b>, <b>, <b^2>)`` for ``b = cosh r a + e^{i theta} sinh r a^dag``.

    These are the moments of ``S^dag rho S`` under ``a``; evaluated directly with
    the Bogoliubov operator, so no extra truncation enters.
    """
    tail = fock.mode_populations(rho, space)[-5:].sum()
    if tail > 1e-6:
        warnings.warn(f"population {tail:.1e} near the Fock cutoff", TruncationWarning, stacklevel=2)
    a, ad = _ops(space)
    b = (np.cosh(r) * a + np.exp(1j * theta) * np.sinh(r) * ad).tocsr()
    bd = b.getH()
    return (
        fock.expectation(bd @ b, rho).real,
        fock.expectation(b, rho),
        fock.expectation(b @ b, rho),
    )


@dataclass(frozen=True)
class WignerGrid:
    """``W(x + i p)`` with ``W[i, j]`` at ``(x[j], p[i])``; ``int W dx dp = 1``."""

    x: np.ndarray
    p: np.ndarray
    W: np.ndarray

    def normalization(self) -> float:
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(self.W.sum() * dx * dp)


def _trim(mode_rho: np.ndarray, tol: float = 1e-22) -> np.ndarray:
    # coherences scale like sqrt(populations), so the cut is far below the target accuracy
    pops = np.abs(np.diag(mode_rho))
    keep = np.flatnonzero(pops > tol)
    k = int(keep[-1]) + 1 if keep.size else 1
    return mode_rho[:k, :k]


def _laguerre_series(L: int, x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Clenshaw sum of ``c_m (-1)^m sqrt(m!/(m+L)!) L_m^L(x)`` over ``m``."""
    n = len(c)
    if n == 1:
        return c[0] * np.ones_like(x)
    y0 = c[-2] * np.ones_like(x)
    y1 = c[-1] * np.ones_like(x)
    k = n
    for i in range(3, n + 1):
        k -= 1
        y0, y1 = (
            c[-i] - y1 * np.sqrt((k - 1) * (L + k - 1) / ((L + k) * k)),
            y0 - y1 * ((L + 2 * k - 1) - x) / np.sqrt((L + k) * k),
        )
    return y0 - y1 * ((L + 1) - x) / np.sqrt(L + 1)


def wigner_mode(mode_rho: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Wigner function of a bare-Fock mode density matrix at complex points ``alpha``.

    Sums the Laguerre series of each diagonal ``rho[m, m+L]`` by Clenshaw
    recursion and collects the diagonals by Horner's rule in ``2 alpha``.
    Stable for dimensions of several hundred, unlike the forward recursion
    over Fock kernels.
    """
    rho = np.asarray(mode_rho, dtype=complex)
    M = rho.shape[0]
    A = 2.0 * np.asarray(alpha, dtype=complex)
    B = np.abs(A) ** 2
    r = rho * (2.0 - np.eye(M))
    w = r[0, -1] * np.ones_like(A)
    with np.errstate(over="ignore", invalid="ignore"):
        for L in range(M - 2, -1, -1):
            w = _laguerre_series(L, B, np.diag(r, L)) + w * A / np.sqrt(L + 1)
        W = w.real * np.exp(-B / 2) * 2.0 / np.pi
    # far outside the state the series overflows before the Gaussian damps it
    far = ~np.isfinite(W)
    if far.any():
        if np.any(B[far] < 4 * (np.sqrt(M) + 6) ** 2):
            raise FloatingPointError("Wigner series overflow inside the support of the state")
        W[far] = 0.0
    return W


def wigner_parity(mode_rho: np.ndarray, alpha: complex) -> float:
    """``(2/pi) Tr[rho D(alpha) Pi D(alpha)^dag]`` from explicit matrices."""
    n = mode_rho.shape[0]
    D = fock.displacement_matrix(alpha, n)
    par = np.diag((-1.0) ** np.arange(n))
    return float(np.real(np.trace(mode_rho @ D @ par @ D.conj().T)) * 2 / np.pi)


def wigner(rho, space: HilbertSpace, x, p) -> WignerGrid:
    """Wigner function of the phonon mode (spins traced out) on an ``x`` by ``p`` grid."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    n = mean_phonon(rho, space)
    reach = min(np.abs(x).max(), np.abs(p).max())
    if reach**2 < n:
        warnings.warn(
            f"grid half-width {reach:.2f} smaller than sqrt(<n>) = {np.sqrt(n):.2f}",
            WignerCoverageWarning,
            stacklevel=2,
        )
    mode = fock.reduced_mode(rho, space)
    bare = _trim(fock.to_bare_fock(mode, space))
    X, P = np.meshgrid(x, p)
    grid = WignerGrid(x, p, wigner_mode(bare, X + 1j * P))
    norm = grid.normalization()
    if norm < 0.99:
        warnings.warn(f"Wigner grid captures only {norm:.3f} of the state", WignerCoverageWarning, stacklevel=2)
    return grid
