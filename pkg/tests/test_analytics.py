import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonolase import analytics, engine, observables as obs
from phonolase.model import DecayRates, EffectiveParams, LaserModel

GAMMA = DecayRates(1.0, 2.5)


def test_analytic_examples():
    assert analytics.analytic_n(0, 0) == 0
    assert analytics.analytic_n(4.0, 0.0) == pytest.approx(4.0)
    assert analytics.analytic_g2(4.0, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert analytics.analytic_n(1.0, 0.7) == pytest.approx(math.cosh(1.4) + math.sinh(0.7) ** 2)
    with pytest.raises(ValueError):
        analytics.analytic_g2(0.0, 0.0)
    with pytest.raises(ValueError):
        analytics.analytic_n(-1.0, 0.2)
    np.testing.assert_allclose(analytics.analytic_n([0.0, 1.0], 0.0), [0.0, 1.0])


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("r", [0.0, 0.35, 0.7, 1.2])
def test_closed_forms_match_brute_force(alpha, r):
    if alpha == 0 and r == 0:
        assert analytics.brute_force_moments(0.0, 0.0, n_max=80)[0] == 0
        return
    n_bf, g2_bf = analytics.brute_force_moments(alpha, r, n_max=400)
    assert n_bf == pytest.approx(analytics.analytic_n(alpha**2, r), rel=1e-8)
    assert g2_bf == pytest.approx(analytics.analytic_g2(alpha**2, r), rel=1e-8)


def test_brute_force_theta_does_not_change_moments():
    ref = analytics.brute_force_moments(1.0, 0.7, 0.0, n_max=200)
    rot = analytics.brute_force_moments(1.0, 0.7, 1.3, n_max=200)
    assert rot == pytest.approx(ref, rel=1e-9)


def test_brute_force_rejects_coarse_phase_grid():
    with pytest.raises(ValueError):
        analytics.brute_force_moments(1.0, 0.3, n_phase=16)


def test_brute_force_warns_on_small_cutoff():
    with pytest.warns(analytics.TruncationWarning):
        analytics.brute_force_moments(3.0, 1.2, n_max=40)


def test_strong_squeezing_saturation():
    assert 1.45 <= analytics.analytic_g2(100.0, 3.0) <= 1.55
    # the large-amplitude limit of the bracket is 3 cosh 4r / (2 cosh^2 2r) -> 1.5
    assert analytics.analytic_g2(1e8, 3.0) == pytest.approx(1.5, abs=1e-3)


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-3, 3.0))
def test_squeezed_vacuum_limit(r):
    assert analytics.analytic_g2(0.0, r) == pytest.approx(3 + 1 / math.sinh(r) ** 2, rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-3, 1e4))
def test_coherent_limit(A):
    assert analytics.analytic_g2(A, 0.0) == 1.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.0, 2.0))
def test_analytic_n_at_least_squeezed_vacuum(A, r):
    assert analytics.analytic_n(A, r) >= math.sinh(r) ** 2 - 1e-12


def test_fit_lorentzian_recovers_parameters():
    w = np.linspace(-2, 2, 8001)
    for n, gam in ((1.5, 0.07), (30.0, 0.004)):
        res = obs.lorentzian_spectrum(n, gam, w)
        n_fit, g_fit, resid = analytics.fit_lorentzian(res)
        assert g_fit == pytest.approx(gam, rel=1e-6)
        assert resid < 1e-6


def test_fit_lorentzian_rejects_flat_or_non_lorentzian():
    w = np.linspace(-1, 1, 401)
    with pytest.raises(analytics.NonLorentzian):
        analytics.fit_lorentzian(obs.SpectrumResult(w, np.zeros_like(w), 0.0, np.nan, "fourier"))
    box = (np.abs(w) < 0.5).astype(float)
    with pytest.raises(analytics.NonLorentzian):
        analytics.fit_lorentzian(obs.SpectrumResult(w, box, 1.0, np.nan, "fourier"))


def test_small_signal_threshold():
    assert analytics.small_signal_threshold(0.15, 1.0, 2.5) == pytest.approx(0.15 / math.sqrt(2.5))
    assert analytics.steepest_rise([0, 1, 2, 3], [0, 0.1, 2, 2.1]) == 1.5


def test_find_threshold_reports_no_sign_change():
    with pytest.raises(analytics.NoSignChange):
        analytics.find_threshold(0.15, 1.0, 2.5, bracket=(0.01, 0.03))
    with pytest.raises(ValueError):
        analytics.find_threshold(0.15, bracket=(0.2, 0.1))


def test_find_threshold_lower_level_and_monotone_ratio():
    res = analytics.find_threshold(0.15, 1.0, 2.5, r=0.0, bracket=(0.02, 0.2), level=0.5, rel_width=1e-2)
    assert res.bracket[0] <= res.g1_th <= res.bracket[1]
    assert res.monotone
    assert res.n_solves == len(res.evaluations)
    ratio, _ = analytics.steady_ratio(res.g1_th, 0.15, GAMMA)
    assert ratio == pytest.approx(0.5, abs=0.02)


def test_ratio_independent_of_r():
    for g1 in (0.05, 0.15):
        r0, _ = analytics.steady_ratio(g1, 0.15, GAMMA, r=0.0)
        r7, _ = analytics.steady_ratio(g1, 0.15, GAMMA, r=0.7)
        assert r7 == pytest.approx(r0, abs=1e-6)


def test_adiabaticity_and_warning():
    assert analytics.adiabaticity(EffectiveParams(0.05, 0.15), GAMMA) == pytest.approx(2.5 / 0.15)
    assert analytics.adiabaticity(EffectiveParams(0.0, 0.0), GAMMA) == math.inf
    m = LaserModel(EffectiveParams(0.2, 0.15, 0.0), GAMMA)
    ss, _ = engine.solve_adaptive(m, 1e-6)
    with pytest.warns(analytics.AdiabaticityWarning):
        analytics.adiabatic_prediction(m.params, GAMMA, ss.rho, ss.space)


def test_linewidth_prediction_in_adiabatic_regime():
    """Well below threshold the fitted width follows <K> - <G> closely."""
    m = LaserModel(EffectiveParams(0.05, 0.15, 0.7), GAMMA)
    ss, _ = engine.solve_adaptive(m, 1e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("error", analytics.AdiabaticityWarning)
        pred, G, K = analytics.adiabatic_prediction(m.params, GAMMA, ss.rho, ss.space)
    spec = obs.spectrum_numeric(ss.rho, m.liouvillian(ss.space), 40 / pred, 8001)
    assert spec.gamma == pytest.approx(pred, rel=0.1)


def test_laser_statistics_record():
    s = analytics.LaserStatistics.from_frame(2.0, 0.5)
    assert s.n_pred == analytics.analytic_n(2.0, 0.5)
    assert s.g2_pred == analytics.analytic_g2(2.0, 0.5)
