import numpy as np
import pytest

from koopman_po.dictionary import delay_dictionary, monomial_dictionary
from koopman_po.experiments import (AccuracyRecord, ExperimentSetup, fit_sweep, observable_coefficients,
                                    run_degree_comparison, run_degree_sweep, run_exponent_table,
                                    run_partial_observation_trial, run_sigma_sweep, simulate_trial_data,
                                    table_variants, target_label, evaluation_points)
from koopman_po.simulate import SimConfig
from koopman_po.systems import make_van_der_pol


@pytest.fixture(scope="module")
def small():
    sim = SimConfig(dt=1e-2, dt_obs=0.1, relax_steps_obs=10, points_per_traj=40, n_traj=20, m_max=4,
                    init_box=((-1.0, 1.0), (-1.0, 1.0)))
    return ExperimentSetup(sim, ref_degree=6, n_test=100)


def test_target_labels():
    assert target_label(1, 1) == "E[X2]"
    assert target_label(0, 2) == "E[X1^2]"


def test_record_validation():
    with pytest.raises(ValueError):
        AccuracyRecord("vdp", {}, 0, "E[X1]", "delay", 2, 0, 0.1, -1.0, 10, 0)
    with pytest.raises(ValueError):
        AccuracyRecord("vdp", {}, 0, "E[X1]", "delay", 2, 0, 0.1, 1.0, 0, 0)


def test_observable_coefficients_one_hot_and_projection(rng):
    d = delay_dictionary(2, 2)
    pts = rng.normal(size=(200, 3))
    c = observable_coefficients(d, d.unit(0, 2), pts)
    assert c[d.index(d.unit(0, 2))] == 1.0 and c.sum() == 1.0
    # z1^2 is not in the linear dictionary; its projection is the least-squares fit
    d1 = delay_dictionary(2, 1)
    c1 = observable_coefficients(d1, (2, 0, 0), pts)
    F = d1.evaluate(pts)
    expected, *_ = np.linalg.lstsq(F, pts[:, 0] ** 2, rcond=None)
    np.testing.assert_allclose(c1, expected)
    # a target spanned by the dictionary is reproduced exactly
    affine = 1.0 + 2.0 * pts[:, 0]
    d0 = monomial_dictionary(3, 1)
    coeffs, *_ = np.linalg.lstsq(d0.evaluate(pts), affine, rcond=None)
    np.testing.assert_allclose(d0.evaluate(pts) @ coeffs, affine, atol=1e-10)


def test_test_points_same_instants_for_every_M(small):
    data = simulate_trial_data(make_van_der_pol(1.0, 0.3), small, 0)
    m_max = small.sim.m_max
    base_hist, base_full = evaluation_points(data.test, 1, m_max, m_max, small.n_test)
    for M in range(m_max + 1):
        hist, full = evaluation_points(data.test, 1, M, m_max, small.n_test)
        np.testing.assert_array_equal(full, base_full)
        np.testing.assert_array_equal(hist, base_hist[:, :M + 1])
        np.testing.assert_array_equal(hist[:, 0], full[:, 1])  # newest value is the current state
    with pytest.raises(ValueError):
        evaluation_points(data.test, 1, m_max + 1, m_max, small.n_test)
    with pytest.raises(ValueError):
        evaluation_points(data.test, 1, 0, m_max, 10**6)


def test_train_and_test_streams_differ(small):
    data = simulate_trial_data(make_van_der_pol(1.0, 0.3), small, 0)
    assert not np.array_equal(data.train.trajectories[0], data.test.trajectories[0])


def test_trial_records_and_determinism(small):
    system = make_van_der_pol(1.0, 0.5)
    a = run_partial_observation_trial(system, 1, range(5), 2, [0, 1], small)
    b = run_partial_observation_trial(system, 1, range(5), 2, [0, 1], small)
    assert a == b
    assert len(a) == 2 * 5 * 2
    assert {r.target for r in a} == {"E[X2]", "E[X2^2]"}
    assert all(r.error >= 0 and np.isfinite(r.error) and r.n_test == 100 for r in a)


def test_deterministic_floor_is_reproducible(small):
    system = make_van_der_pol(1.0, 0.0)
    a = run_partial_observation_trial(system, 1, 4, 2, [3], small)
    b = run_partial_observation_trial(system, 1, 4, 2, [3], small)
    for ra, rb in zip(a, b):
        assert np.isfinite(ra.error)
        assert abs(ra.error - rb.error) <= 1e-10


def test_degree_sweep_and_self_comparison(small):
    system = make_van_der_pol(1.0, 0.0)
    recs = run_degree_sweep(system, 1, [1, 2], [0], small)
    assert [(r.degree, r.target) for r in recs] == [(1, "E[X2]"), (1, "E[X2^2]"), (2, "E[X2]"), (2, "E[X2^2]")]
    assert all(r.M == 0 and r.dict_kind == "full_state" for r in recs)
    same = run_degree_comparison(system, [1], M=0, seeds=[0], setup=small, degrees=(1, 1))
    assert same[0].error == same[1].error


def test_sigma_sweep_and_fits(small):
    system = make_van_der_pol(1.0)
    grid = [0.1, 0.2, 0.4, 0.8]
    recs = run_sigma_sweep(system, [0, 1], 2, grid, [0], small, powers=(1,), jobs=1)
    assert len(recs) == 4 * 2
    assert sorted({r.sigma for r in recs}) == grid
    fits = fit_sweep(recs)
    assert set(k[2] for k in fits) == {"E[X1]", "E[X2]"}
    assert all(f.n_points == 4 for f in fits.values())
    with pytest.raises(ValueError):
        fit_sweep(run_sigma_sweep(system, [1], 2, [0.5], [0], small, jobs=1))


def test_parallel_matches_serial(small):
    system = make_van_der_pol(1.0)
    grid = [0.1, 0.3]
    serial = run_sigma_sweep(system, [1], 2, grid, [0, 1], small, jobs=1)
    parallel = run_sigma_sweep(system, [1], 2, grid, [0, 1], small, jobs=2)
    assert serial == parallel


def test_table_names():
    assert [v[0] for v in table_variants("modified_vdp")] == ["h=x1^1", "h=x1^3", "h=x1^5"]
    assert table_variants("lorenz_rho13")[0][1].params["rho"] == 13.0
    with pytest.raises(ValueError):
        table_variants("nope")
    with pytest.raises(ValueError):
        run_exponent_table("")
