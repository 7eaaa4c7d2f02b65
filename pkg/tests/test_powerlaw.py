import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koopman_po.powerlaw import fit_power_law, power_law

GRID = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0]


def test_exact_recovery():
    s = np.array(GRID)
    fit = fit_power_law(s, 2.0 * s**0.8 + 0.01)
    np.testing.assert_allclose([fit.alpha1, fit.alpha2, fit.alpha3], [0.8, 2.0, 0.01], atol=1e-6)
    assert fit.converged and fit.identifiable and fit.residual_rms < 1e-9
    assert fit.n_points == 6


def test_constant_errors_are_unidentifiable():
    fit = fit_power_law(GRID, [0.3] * 6)
    assert not fit.identifiable and np.isnan(fit.alpha1)
    assert fit.alpha2 == 0.0 and fit.alpha3 == pytest.approx(0.3)


@pytest.mark.parametrize("sig, err", [
    ([1.0], [1.0]),
    ([1.0, 2.0, 3.0, 3.0], [1.0, 2.0, 3.0, 3.0]),
    ([0.0, 1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0]),
    ([1.0, 2.0, 3.0, 4.0], [1.0, -2.0, 3.0, 4.0]),
    ([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0]),
])
def test_rejects_bad_input(sig, err):
    with pytest.raises(ValueError):
        fit_power_law(sig, err)


def test_duplicate_sigmas_allowed():
    s = np.array(GRID + [2.0, 3.0])
    fit = fit_power_law(s, 1.5 * s**1.1 + 0.2)
    assert fit.alpha1 == pytest.approx(1.1, abs=1e-6)


def test_residual_matches_model(rng):
    s = np.array(GRID)
    err = 0.5 * s**1.2 + 0.05 + rng.normal(scale=0.02, size=6)
    fit = fit_power_law(s, err)
    rms = np.sqrt(np.mean((err - fit(s)) ** 2))
    assert fit.residual_rms == pytest.approx(rms, rel=1e-12)
    assert fit.residual_rms >= 0


def test_deterministic(rng):
    s = np.array(GRID)
    err = 0.5 * s**1.2 + 0.05 + rng.normal(scale=0.02, size=6)
    assert fit_power_law(s, err) == fit_power_law(s, err)


def test_fit_is_a_local_minimum(rng):
    s = np.array(GRID)
    err = 0.3 * s**0.9 + 0.1 + rng.normal(scale=0.01, size=6)
    fit = fit_power_law(s, err)
    p = np.array([fit.alpha1, fit.alpha2, fit.alpha3])
    base = np.sum((err - power_law(s, *p)) ** 2)
    for k in range(3):
        for h in (-1e-4, 1e-4):
            q = p.copy()
            q[k] += h
            assert np.sum((err - power_law(s, *q)) ** 2) >= base - 1e-15


@settings(max_examples=40)
@given(a1=st.floats(0.3, 2.0), a2=st.floats(0.1, 5.0), a3=st.floats(0.0, 0.5))
def test_recovery_property(a1, a2, a3):
    s = np.array(GRID)
    fit = fit_power_law(s, a2 * s**a1 + a3 + 1e-3)
    np.testing.assert_allclose([fit.alpha1, fit.alpha2, fit.alpha3], [a1, a2, a3 + 1e-3], rtol=1e-5, atol=1e-6)
