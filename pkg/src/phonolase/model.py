"""Hamiltonians, collapse operators and squeezing parameters of the two-ion laser.

Rates are in units of the ion-1 decay rate (``gamma1 = 1`` by default). The
model lives in the interaction picture with both sidebands resonant, so there
is no free mode or spin term and spectra are centred on zero.

Phase convention: a complex sideband coupling is ``|g| exp(-i phi)``. With
``theta = phi_1r - phi_1b = phi_2r - phi_2b`` the lab Hamiltonian equals

    g1 (cosh r a^dag + e^{-i theta} sinh r a) sigma1^+
  + g2 (cosh r a + e^{+i theta} sinh r a^dag) sigma2^+ + h.c.

after the phases ``phi_1b`` and ``phi_2r`` are absorbed into the spin raising
operators (see :func:`spin_phase_frame`). The bracketed operators are ``b^dag``
and ``b`` for ``b = S a S^dag = cosh r a + e^{i theta} sinh r a^dag``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import fock
from .fock import HilbertSpace

TOL = 1e-9
TWO_PI = 2 * math.pi


class ModelError(ValueError):
    pass


class RatioMismatch(ModelError):
    """The two ions imply different squeezing amplitudes."""


class PhaseMismatch(ModelError):
    """The two ions imply different squeezing phases."""


def _wrap(phase: float) -> float:
    return float(np.mod(phase, TWO_PI))


def _phase_distance(a: float, b: float) -> float:
    d = np.mod(a - b + math.pi, TWO_PI) - math.pi
    return abs(float(d))


@dataclass(frozen=True)
class SidebandCouplings:
    """Blue/red sideband coupling magnitudes and phases for both ions."""

    g1b: float
    g1r: float = 0.0
    g2b: float = 0.0
    g2r: float = 0.0
    phi1b: float = 0.0
    phi1r: float = 0.0
    phi2b: float = 0.0
    phi2r: float = 0.0

    def __post_init__(self):
        for name in ("g1b", "g1r", "g2b", "g2r"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be >= 0")

    def complex(self, ion: int, sideband: str) -> complex:
        mag = getattr(self, f"g{ion}{sideband}")
        phi = getattr(self, f"phi{ion}{sideband}")
        return mag * np.exp(-1j * phi)

    def validate_squeezed(self) -> None:
        if not self.g1r < self.g1b:
            raise ModelError("squeezed laser requires |g_1r| < |g_1b|")
        if not self.g2b < self.g2r:
            raise ModelError("squeezed laser requires |g_2b| < |g_2r|")


@dataclass(frozen=True)
class EffectiveParams:
    g1: float
    g2: float
    r: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.g1 < 0 or self.g2 < 0:
            raise ModelError("effective couplings must be >= 0")
        if self.r < 0:
            raise ModelError("squeezing amplitude r must be >= 0")


@dataclass(frozen=True)
class DecayRates:
    gamma1: float = 1.0
    gamma2: float = 1.0

    def __post_init__(self):
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ModelError("decay rates must be > 0")


@dataclass(frozen=True)
class DriveParams:
    gd1: float = 0.0
    gd2: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0

    def __post_init__(self):
        if self.gd1 < 0 or self.gd2 < 0:
            raise ModelError("drive amplitudes must be >= 0")

    @property
    def is_zero(self) -> bool:
        return self.gd1 == 0 and self.gd2 == 0


def effective_params(c: SidebandCouplings, tol: float = TOL) -> EffectiveParams:
    """Map sideband couplings to ``(g1, g2, r, theta)``.

    Raises :class:`RatioMismatch` / :class:`PhaseMismatch` when the two ions do
    not share one squeezing amplitude and phase.
    """
    c.validate_squeezed()
    t1 = c.g1r / c.g1b
    t2 = c.g2b / c.g2r
    if abs(t1 - t2) > tol * max(1.0, abs(t1)):
        raise RatioMismatch(f"|g1r/g1b| = {t1:.12g} but |g2b/g2r| = {t2:.12g}")
    theta1 = c.phi1r - c.phi1b
    theta2 = c.phi2r - c.phi2b
    # the phase of a vanishing sideband is irrelevant
    if t1 > 0 and _phase_distance(theta1, theta2) > tol * max(1.0, abs(theta1)):
        raise PhaseMismatch(f"phi1r-phi1b = {theta1:.12g} but phi2r-phi2b = {theta2:.12g}")
    return EffectiveParams(
        g1=math.sqrt(c.g1b**2 - c.g1r**2),
        g2=math.sqrt(c.g2r**2 - c.g2b**2),
        r=math.atanh(t1),
        theta=_wrap(theta1) if t1 > 0 else 0.0,
    )


def sideband_couplings(p: EffectiveParams, phi1b: float = 0.0, phi2r: float = 0.0) -> SidebandCouplings:
    """Inverse of :func:`effective_params` for chosen reference phases."""
    ch, sh = math.cosh(p.r), math.sinh(p.r)
    return SidebandCouplings(
        g1b=p.g1 * ch,
        g1r=p.g1 * sh,
        g2b=p.g2 * sh,
        g2r=p.g2 * ch,
        phi1b=phi1b,
        phi1r=phi1b + p.theta,
        phi2b=phi2r - p.theta,
        phi2r=phi2r,
    )


def _hc(H):
    return (H + H.getH()).tocsr()


def lab_hamiltonian(c: SidebandCouplings, space: HilbertSpace) -> sp.csr_matrix:
    a = fock.annihilation_op(space)
    ad = a.getH()
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for ion in (1, 2):
        splus, _, _ = fock.spin_ops(space, ion)
        H = H + c.complex(ion, "b") * ad @ splus + c.complex(ion, "r") * a @ splus
    return _hc(H)


def reparam_hamiltonian(p: EffectiveParams, space: HilbertSpace) -> sp.csr_matrix:
    a = fock.annihilation_op(space)
    ad = a.getH()
    s1p, _, _ = fock.spin_ops(space, 1)
    s2p, _, _ = fock.spin_ops(space, 2)
    ch, sh = math.cosh(p.r), math.sinh(p.r)
    ph = np.exp(1j * p.theta)
    H = (
        p.g1 * ch * ad @ s1p
        + p.g1 * sh * np.conj(ph) * a @ s1p
        + p.g2 * sh * ph * ad @ s2p
        + p.g2 * ch * a @ s2p
    )
    return _hc(H)


def squeezed_frame_hamiltonian(p: EffectiveParams, space: HilbertSpace) -> sp.csr_matrix:
    """Bare two-ion laser ``g1 a^dag sigma1^+ + g2 a sigma2^+ + h.c.``.

    This is the reparameterised Hamiltonian conjugated by the squeeze unitary,
    ``S^dag H_reparam S`` (``b`` replaced by ``a``).
    """
    a = fock.annihilation_op(space)
    s1p, _, _ = fock.spin_ops(space, 1)
    s2p, _, _ = fock.spin_ops(space, 2)
    return _hc(p.g1 * a.getH() @ s1p + p.g2 * a @ s2p)


def spin_phase_frame(c: SidebandCouplings, space: HilbertSpace) -> sp.csr_matrix:
    """Diagonal unitary ``V`` with ``lab_hamiltonian = V reparam_hamiltonian V^dag``."""
    v1 = np.array([1.0, np.exp(-1j * c.phi1b)])
    v2 = np.array([1.0, np.exp(-1j * c.phi2r)])
    diag = np.kron(np.kron(v1, v2), np.ones(space.n_max))
    return sp.diags(diag, format="csr")


def drive_hamiltonian(d: DriveParams, space: HilbertSpace) -> sp.csr_matrix:
    a = fock.annihilation_op(space)
    F = d.gd1 * np.exp(1j * d.phi1) + d.gd2 * np.exp(1j * d.phi2)
    # F a + F* a^dag
    return (F * a + np.conj(F) * a.getH()).tocsr()


def drive_matching(d: DriveParams) -> tuple[float, float]:
    """Squeezing ``(r, theta)`` matched by a two-tone drive."""
    if not d.gd2 < d.gd1:
        raise ModelError("drive matching needs gd2 < gd1 (tanh r < 1)")
    return math.atanh(d.gd2 / d.gd1), _wrap(-d.phi1 - d.phi2)


def matched_drive(gd1: float, r: float, theta: float, phi1: float) -> DriveParams:
    """Two-tone drive whose matching conditions reproduce ``(r, theta)``."""
    return DriveParams(gd1=gd1, gd2=gd1 * math.tanh(r), phi1=phi1, phi2=-phi1 - theta)


def collapse_ops(gamma: DecayRates, space: HilbertSpace) -> list[sp.csr_matrix]:
    _, s1m, _ = fock.spin_ops(space, 1)
    _, s2m, _ = fock.spin_ops(space, 2)
    return [math.sqrt(gamma.gamma1) * s1m, math.sqrt(gamma.gamma2) * s2m]


@dataclass(frozen=True)
class LaserModel:
    """Complete undriven/driven model, independent of the numerical basis.

    ``basis`` chooses the mode basis used for solving: ``"bare"`` (number
    states) or ``"squeezed"`` (number states of the squeezed mode, matched to
    ``params.r`` and ``params.theta``). Both describe the same lab-frame
    Hamiltonian; the squeezed basis needs far fewer levels above threshold.
    """

    params: EffectiveParams
    decay: DecayRates = field(default_factory=DecayRates)
    drive: DriveParams | None = None
    basis: str = "squeezed"
    basis_r: float | None = None
    basis_theta: float | None = None

    def __post_init__(self):
        if self.basis not in ("bare", "squeezed"):
            raise ModelError(f"basis must be 'bare' or 'squeezed', got {self.basis!r}")

    def with_params(self, **changes) -> "LaserModel":
        return replace(self, params=replace(self.params, **changes))

    def space(self, n_max: int, margin: int | None = None) -> HilbertSpace:
        if self.basis == "bare":
            return HilbertSpace(n_max, margin)
        r = self.params.r if self.basis_r is None else self.basis_r
        theta = self.params.theta if self.basis_theta is None else self.basis_theta
        return HilbertSpace(n_max, margin, basis_r=r, basis_theta=theta)

    def hamiltonian(self, space: HilbertSpace) -> sp.csr_matrix:
        H = reparam_hamiltonian(self.params, space)
        if self.drive is not None and not self.drive.is_zero:
            H = (H + drive_hamiltonian(self.drive, space)).tocsr()
        return H

    def collapse_ops(self, space: HilbertSpace):
        return collapse_ops(self.decay, space)

    def liouvillian(self, space: HilbertSpace):
        from .engine import liouvillian

        return liouvillian(self.hamiltonian(space), self.collapse_ops(space), space=space)

    def reference_liouvillian(self, space: HilbertSpace):
        """Generator without the drive, used to precondition driven solves."""
        return replace(self, drive=None).liouvillian(space)
