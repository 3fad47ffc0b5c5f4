import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonolase import engine, fock, model
from phonolase.fock import HilbertSpace, TruncationWarning
from phonolase.model import (
    DecayRates,
    DriveParams,
    EffectiveParams,
    LaserModel,
    ModelError,
    PhaseMismatch,
    RatioMismatch,
    SidebandCouplings,
)


def dense(M):
    return M.toarray()


def test_effective_params_zero_ratio():
    p = model.effective_params(SidebandCouplings(g1b=0.2, g2r=0.15))
    assert (p.g1, p.g2, p.r) == pytest.approx((0.2, 0.15, 0.0))


def test_effective_params_ratio_06():
    p = model.effective_params(SidebandCouplings(g1b=0.2, g1r=0.12, g2b=0.09, g2r=0.15))
    assert p.r == pytest.approx(math.atanh(0.6), abs=1e-12)
    assert p.r == pytest.approx(0.6931, abs=1e-4)
    assert p.theta == pytest.approx(0.0)
    assert p.g1 == pytest.approx(0.16, abs=1e-12)
    assert p.g2 == pytest.approx(0.12, abs=1e-12)
    # the moderate squeezing value used for the driven study, to rounding
    assert round(p.r, 1) == 0.7


def test_effective_params_errors():
    with pytest.raises(RatioMismatch):
        model.effective_params(SidebandCouplings(g1b=0.2, g1r=0.12, g2b=0.05, g2r=0.15))
    with pytest.raises(PhaseMismatch):
        model.effective_params(SidebandCouplings(0.2, 0.12, 0.09, 0.15, phi1r=0.3))
    with pytest.raises(ModelError):
        model.effective_params(SidebandCouplings(g1b=0.1, g1r=0.2, g2r=0.15))
    with pytest.raises(ModelError):
        SidebandCouplings(g1b=-0.1)
    with pytest.raises(ModelError):
        DecayRates(0.0, 1.0)


def test_effective_params_theta():
    c = SidebandCouplings(0.2, 0.12, 0.09, 0.15, phi1b=0.4, phi1r=1.1, phi2b=-0.2, phi2r=0.5)
    assert model.effective_params(c).theta == pytest.approx(0.7)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.0, 2.0),
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
)
def test_roundtrip_sideband_magnitudes(g1, g2, r, theta, phi1b, phi2r):
    p = EffectiveParams(g1, g2, r, theta)
    c = model.sideband_couplings(p, phi1b, phi2r)
    assert c.g1b == pytest.approx(g1 * math.cosh(r), rel=1e-12)
    assert c.g1r == pytest.approx(g1 * math.sinh(r), rel=1e-12, abs=1e-15)
    assert c.g2r == pytest.approx(g2 * math.cosh(r), rel=1e-12)
    assert c.g2b == pytest.approx(g2 * math.sinh(r), rel=1e-12, abs=1e-15)
    if r > 1e-6:
        back = model.effective_params(c)
        assert (back.g1, back.g2, back.r) == pytest.approx((g1, g2, r), rel=1e-9)
        assert abs(np.exp(1j * back.theta) - np.exp(1j * theta)) < 1e-9


def test_lab_hamiltonian_examples():
    s = HilbertSpace(6)
    assert abs(model.lab_hamiltonian(SidebandCouplings(0.0), s)).max() == 0
    H = model.lab_hamiltonian(SidebandCouplings(g1b=0.2), s)
    assert fock.is_hermitian(H)
    bra = fock.basis_ket(s, 1, 0, 1)
    ket = fock.basis_ket(s, 0, 0, 0)
    assert bra.conj() @ (H @ ket) == pytest.approx(0.2)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(0.0, 1.5), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-3, 3))
def test_lab_equals_reparam(g1, g2, r, theta, phi1b, phi2r):
    """Exact identity on the truncated space (no projection involved)."""
    s = HilbertSpace(10)
    p = EffectiveParams(g1, g2, r, theta)
    c = model.sideband_couplings(p, phi1b, phi2r)
    V = model.spin_phase_frame(c, s)
    lab = model.lab_hamiltonian(c, s)
    rep = model.reparam_hamiltonian(p, s)
    assert np.max(np.abs(dense(lab - V @ rep @ V.getH()))) < 1e-12
    if phi1b == 0 and phi2r == 0:
        pass


def test_lab_equals_reparam_zero_phase():
    s = HilbertSpace(12)
    c = SidebandCouplings(0.2, 0.12, 0.09, 0.15)
    p = model.effective_params(c)
    diff = model.lab_hamiltonian(c, s) - model.reparam_hamiltonian(p, s)
    assert np.max(np.abs(dense(diff))) < 1e-12


def test_reparam_r0_is_bare_laser():
    s = HilbertSpace(8)
    p = EffectiveParams(0.2, 0.15, 0.0)
    np.testing.assert_allclose(
        dense(model.reparam_hamiltonian(p, s)), dense(model.squeezed_frame_hamiltonian(p, s)), atol=1e-15
    )


@pytest.mark.parametrize("theta", [0.0, 1.2])
def test_squeeze_maps_reparam_to_hsq(theta):
    """S^dag H_reparam S = H_sq on the interior of a large cutoff."""
    r, n = 0.7, 160
    p = EffectiveParams(0.2, 0.15, r, theta)
    s = HilbertSpace(n)
    S = fock.squeeze_op(r, theta, s)
    lhs = dense(S.getH() @ model.reparam_hamiltonian(p, s) @ S)
    rhs = dense(model.squeezed_frame_hamiltonian(p, s))
    k = fock.squeeze_interior(r, n)
    keep = np.flatnonzero(s.labels()["n"] < k)
    assert np.max(np.abs((lhs - rhs)[np.ix_(keep, keep)])) < 1e-6


def test_reparam_is_hsq_in_matched_basis():
    """In the squeezed Fock basis with the same (r, theta) the matrices coincide exactly."""
    p = EffectiveParams(0.2, 0.15, 0.7, 0.5)
    s = HilbertSpace(12, basis_r=0.7, basis_theta=0.5)
    bare = HilbertSpace(12)
    diff = model.reparam_hamiltonian(p, s) - model.squeezed_frame_hamiltonian(p, bare)
    assert np.max(np.abs(dense(diff))) < 1e-13


def test_drive_hamiltonian():
    s = HilbertSpace(6)
    assert abs(model.drive_hamiltonian(DriveParams(), s)).max() == 0
    d = DriveParams(0.015, 0.009, math.pi / 2, -math.pi / 2)
    H = model.drive_hamiltonian(d, s)
    assert fock.is_hermitian(H)
    elem = fock.basis_ket(s, 0, 0, 1).conj() @ (H @ fock.basis_ket(s, 0, 0, 0))
    assert elem == pytest.approx(0.015 * np.exp(-1j * math.pi / 2) + 0.009 * np.exp(1j * math.pi / 2))
    # acts on the mode only: commutes with every spin operator
    for ion in (1, 2):
        for op in fock.spin_ops(s, ion):
            assert abs(fock.commutator(H, op)).max() < 1e-15


def test_drive_matching():
    r, theta = model.drive_matching(DriveParams(0.015, 0.009, math.pi / 2, -math.pi / 2))
    assert r == pytest.approx(0.6931, abs=1e-4)
    assert theta == pytest.approx(0.0, abs=1e-12)
    assert model.drive_matching(DriveParams(0.015, 0.0))[0] == 0
    assert model.drive_matching(DriveParams(0.015, 0.009))[1] == 0
    with pytest.raises(ModelError):
        model.drive_matching(DriveParams(0.01, 0.01))
    d = model.matched_drive(0.015, 0.4, 0.3, 1.0)
    assert model.drive_matching(d) == pytest.approx((0.4, 0.3))


def test_collapse_ops_relax_to_ground():
    s = HilbertSpace(4)
    gamma = DecayRates(1.0, 2.5)
    cs = model.collapse_ops(gamma, s)
    L = engine.liouvillian(0 * fock.identity(s), cs, s)
    rho0 = fock.pure_state(fock.basis_ket(s, 1, 1, 0))
    rho = engine.propagate(rho0, L, 40.0)
    assert rho[s.index(0, 0, 0), s.index(0, 0, 0)].real == pytest.approx(1, abs=1e-8)


def test_collapse_decay_rates():
    s = HilbertSpace(4)
    cs = model.collapse_ops(DecayRates(1.0, 2.5), s)
    L = engine.liouvillian(0 * fock.identity(s), cs, s)
    psi = (fock.basis_ket(s, 0, 0, 0) + fock.basis_ket(s, 1, 0, 0)) / np.sqrt(2)
    ts = np.array([0.0, 0.5, 1.0, 2.0])
    traj = engine.propagate(fock.pure_state(psi), L, ts)
    sp1, sm1, sz1 = fock.spin_ops(s, 1)
    sm = np.array([fock.expectation(sm1, r) for r in traj])
    sz = np.array([fock.expectation(sz1, r).real for r in traj])
    np.testing.assert_allclose(sm, sm[0] * np.exp(-ts / 2), atol=1e-8)
    np.testing.assert_allclose(sz, -1 + (sz[0] + 1) * np.exp(-ts), atol=1e-8)


def test_laser_model_bases_agree():
    p = EffectiveParams(0.1, 0.15, 0.5)
    gamma = DecayRates(1.0, 2.5)
    bare = LaserModel(p, gamma, basis="bare")
    sq = LaserModel(p, gamma, basis="squeezed")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        Hb = bare.hamiltonian(bare.space(8))
    assert fock.is_hermitian(Hb)
    assert sq.space(8).basis_r == 0.5
    with pytest.raises(ModelError):
        LaserModel(p, basis="weird")


def test_all_hamiltonians_hermitian():
    s = HilbertSpace(10, basis_r=0.3)
    p = EffectiveParams(0.2, 0.15, 0.7, 0.4)
    for H in (
        model.reparam_hamiltonian(p, s),
        model.squeezed_frame_hamiltonian(p, s),
        model.lab_hamiltonian(model.sideband_couplings(p, 0.2, -0.3), s),
        model.drive_hamiltonian(DriveParams(0.01, 0.004, 0.2, 1.0), s),
    ):
        assert fock.is_hermitian(H)
