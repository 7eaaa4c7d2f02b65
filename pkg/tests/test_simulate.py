import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koopman_po.simulate import (SimConfig, SimulationDivergence, TrajectoryDataset, delay_windows,
                                 euler_maruyama_step, latest_histories, make_delay_pairs, make_fullstate_pairs,
                                 simulate_dataset, trajectory_rng)
from koopman_po.systems import MultiIndexPolynomial, SdeSystem, make_lorenz, make_ornstein_uhlenbeck, make_van_der_pol


def small_cfg(**kw):
    base = dict(dt=1e-3, dt_obs=0.1, relax_steps_obs=5, points_per_traj=12, n_traj=4, m_max=3, seed=7)
    base.update(kw)
    return SimConfig(**base)


def test_em_step_examples():
    vdp = make_van_der_pol(1.0, sigma=1.0)
    np.testing.assert_allclose(euler_maruyama_step(vdp, [0.0, 0.0], 0.01, [1.0, -1.0]), [0.1, -0.1], rtol=1e-14)
    lor = make_lorenz(sigma=0.0)
    x = np.array([1.0, 1.0, 1.0])
    np.testing.assert_allclose(euler_maruyama_step(lor, x, 1e-4, np.ones(3)),
                               x + 1e-4 * np.array([0.0, 26.0, 1 - 8 / 3]), rtol=1e-15)


def test_em_zero_noise_is_euler_bitwise(rng):
    s = make_van_der_pol(1.0, sigma=0.0)
    x = rng.normal(size=(20, 2))
    out = euler_maruyama_step(s, x, 1e-3, rng.normal(size=(20, 2)))
    assert np.array_equal(out, x + s.drift_at(x) * 1e-3)


def test_em_dimension_mismatch():
    with pytest.raises(ValueError):
        euler_maruyama_step(make_lorenz(), [0.0, 0.0, 0.0], 1e-3, [0.0, 0.0])


def test_config_validation():
    with pytest.raises(ValueError):
        small_cfg(dt_obs=0.1005)
    with pytest.raises(ValueError):
        small_cfg(points_per_traj=4)
    with pytest.raises(ValueError):
        small_cfg(seed=-1)
    assert small_cfg(dt=1e-4, dt_obs=0.01).steps_per_obs == 100


def test_protocol_defaults():
    c = SimConfig.protocol_defaults("lorenz")
    assert (c.dt, c.dt_obs, c.points_per_traj, c.n_traj, c.relax_steps_obs) == (1e-4, 0.01, 109, 100, 100)
    assert c.init_box == ((-10.0, 10.0),) * 3
    assert SimConfig.protocol_defaults("van_der_pol").init_box == ((-1.0, 1.0),) * 2


def test_protocol_gives_ten_thousand_pairs():
    cfg = SimConfig.protocol_defaults("van_der_pol", relax_steps_obs=1)
    ds = simulate_dataset(make_van_der_pol(sigma=0.5), cfg)
    assert ds.trajectories.shape == (100, 109, 2)
    assert len(make_delay_pairs(ds, 1, 8)) == 10_000
    short = TrajectoryDataset("x", 0.0, 0.1, ds.trajectories[:, :101])
    assert len(make_fullstate_pairs(short)) == 10_000


def test_times_are_dt_obs_apart():
    ds = simulate_dataset(make_van_der_pol(sigma=0.2), small_cfg())
    np.testing.assert_allclose(np.diff(ds.times), 0.1)
    assert ds.t0 == pytest.approx(0.5)


def test_seed_determinism_and_stream_separation():
    s = make_van_der_pol(sigma=0.5)
    a = simulate_dataset(s, small_cfg())
    b = simulate_dataset(s, small_cfg())
    assert np.array_equal(a.trajectories, b.trajectories)
    c = simulate_dataset(s, small_cfg(), stream=1)
    assert not np.array_equal(a.trajectories, c.trajectories)
    d = simulate_dataset(s, small_cfg(seed=8))
    assert not np.array_equal(a.trajectories, d.trajectories)


def test_trajectories_independent_of_batch_size():
    s = make_van_der_pol(sigma=0.5)
    big = simulate_dataset(s, small_cfg(n_traj=6))
    small = simulate_dataset(s, small_cfg(n_traj=2))
    assert np.array_equal(big.trajectories[:2], small.trajectories)


def test_noiseless_runs_depend_only_on_initial_points():
    s = make_van_der_pol(sigma=0.0)
    cfg = small_cfg(init_box=((0.3, 0.3), (-0.2, -0.2)))
    a = simulate_dataset(s, cfg)
    b = simulate_dataset(s, small_cfg(seed=99, init_box=((0.3, 0.3), (-0.2, -0.2))))
    assert np.array_equal(a.trajectories, b.trajectories)


def test_single_pair():
    ds = simulate_dataset(make_van_der_pol(sigma=0.1), small_cfg(n_traj=1, points_per_traj=2, m_max=0))
    p = make_fullstate_pairs(ds)
    assert len(p) == 1
    np.testing.assert_array_equal(p.X[0], ds.trajectories[0, 0])
    np.testing.assert_array_equal(p.Y[0], ds.trajectories[0, 1])


def test_fullstate_pairs_round_trip():
    ds = simulate_dataset(make_van_der_pol(sigma=0.3), small_cfg())
    p = make_fullstate_pairs(ds)
    X = p.X.reshape(ds.n_traj, -1, 2)
    Y = p.Y.reshape(ds.n_traj, -1, 2)
    rebuilt = np.concatenate([X, Y[:, -1:]], axis=1)
    assert np.array_equal(rebuilt, ds.trajectories)


def test_delay_windows_example():
    traj = np.zeros((1, 5, 2))
    traj[0, :, 1] = [10.0, 11.0, 12.0, 13.0, 14.0]
    ds = TrajectoryDataset("t", 0.0, 0.1, traj)
    p = make_delay_pairs(ds, 1, 2)
    np.testing.assert_array_equal(p.X[0], [12.0, 11.0, 10.0])
    np.testing.assert_array_equal(p.Y[0], [13.0, 12.0, 11.0])
    assert len(p) == 2
    p0 = make_delay_pairs(ds, 1, 0)
    np.testing.assert_array_equal(p0.X[:, 0], traj[0, :-1, 1])
    with pytest.raises(ValueError):
        make_delay_pairs(ds, 1, 4)
    with pytest.raises(ValueError):
        make_delay_pairs(ds, 2, 1)


def test_delay_pairs_shift_consistency_and_no_boundary_crossing():
    ds = simulate_dataset(make_van_der_pol(sigma=0.5), small_cfg())
    M = 3
    p = make_delay_pairs(ds, 0, M)
    assert np.array_equal(p.Y[:, 1:], p.X[:, :-1])
    per = ds.points_per_traj - M - 1
    assert len(p) == ds.n_traj * per
    for i in range(ds.n_traj):
        block = p.X[i * per:(i + 1) * per]
        assert np.array_equal(block[:, -1], ds.trajectories[i, :per, 0])


def test_latest_histories():
    ds = simulate_dataset(make_van_der_pol(sigma=0.5), small_cfg())
    hist, full = latest_histories(ds, 1, 2)
    np.testing.assert_array_equal(hist[:, 0], ds.trajectories[:, -1, 1])
    np.testing.assert_array_equal(hist[:, 2], ds.trajectories[:, -3, 1])
    np.testing.assert_array_equal(full, ds.trajectories[:, -1])


@given(st.integers(0, 5), st.integers(7, 12))
def test_delay_windows_property(M, n):
    s = np.arange(float(n))
    w = delay_windows(s, M)
    assert w.shape == (n - M, M + 1)
    assert np.array_equal(w[:, 0] - w[:, -1], np.full(n - M, float(M)))


def test_wiener_increment_statistics():
    n = 100_000
    dt = 1e-3
    z = trajectory_rng(3, 0).standard_normal(n)
    inc = np.sqrt(dt) * z
    assert abs(z.mean()) < 4 / np.sqrt(n)
    assert abs(inc.var() / dt - 1) < 0.05


def test_divergence_is_reported():
    blow = SdeSystem("blow", 1, (MultiIndexPolynomial.from_terms(1, {(3,): 1.0}),), 0.0, {})
    cfg = SimConfig(dt=0.01, dt_obs=0.1, relax_steps_obs=50, points_per_traj=2, n_traj=2, m_max=0,
                    init_box=((2.0, 2.0),))
    with pytest.raises(SimulationDivergence) as err:
        with np.errstate(over="ignore", invalid="ignore"):
            simulate_dataset(blow, cfg)
    assert err.value.traj_index == 0


def test_ou_weak_mean():
    sigma, x0, t = 0.5, 1.0, 1.0
    cfg = SimConfig(dt=1e-3, dt_obs=t, relax_steps_obs=0, points_per_traj=2, n_traj=10_000, m_max=0, seed=1,
                    init_box=((x0, x0),))
    ds = simulate_dataset(make_ornstein_uhlenbeck(1.0, sigma), cfg)
    xt = ds.trajectories[:, 1, 0]
    se = xt.std(ddof=1) / np.sqrt(len(xt))
    assert abs(xt.mean() - np.exp(-t) * x0) < 3 * se
