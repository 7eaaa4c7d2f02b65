"""Euler-Maruyama Monte Carlo data and snapshot-pair construction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .systems import SdeSystem


class SimulationDivergence(RuntimeError):
    """A trajectory produced a non-finite state."""

    def __init__(self, traj_index: int, time: float):
        super().__init__(f"trajectory {traj_index} became non-finite at t={time:.6g}")
        self.traj_index = traj_index
        self.time = time


@dataclass(frozen=True)
class SimConfig:
    dt: float
    dt_obs: float
    relax_steps_obs: int = 100
    points_per_traj: int = 109
    n_traj: int = 100
    m_max: int = 8
    seed: int = 0
    init_box: tuple[tuple[float, float], ...] = ((-1.0, 1.0), (-1.0, 1.0))

    def __post_init__(self):
        if not (self.dt > 0 and self.dt_obs > 0):
            raise ValueError("dt and dt_obs must be positive")
        ratio = self.dt_obs / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ValueError(f"dt_obs={self.dt_obs} is not an integer multiple of dt={self.dt}")
        if self.relax_steps_obs < 0 or self.m_max < 0:
            raise ValueError("relax_steps_obs and m_max must be non-negative")
        if self.n_traj < 1:
            raise ValueError("n_traj must be positive")
        if self.points_per_traj < self.m_max + 2:
            raise ValueError(f"points_per_traj={self.points_per_traj} < m_max + 2 = {self.m_max + 2}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        box = tuple((float(lo), float(hi)) for lo, hi in self.init_box)
        if any(hi < lo for lo, hi in box):
            raise ValueError("init_box intervals must have lo <= hi")
        object.__setattr__(self, "init_box", box)

    @property
    def steps_per_obs(self) -> int:
        return int(round(self.dt_obs / self.dt))

    @classmethod
    def protocol_defaults(cls, system_name: str, m_max: int = 8, **overrides) -> "SimConfig":
        """Protocol values for the benchmark systems (vdP-like or Lorenz)."""
        if system_name == "lorenz":
            base = dict(dt=1e-4, dt_obs=0.01, init_box=((-10.0, 10.0),) * 3)
        elif system_name in ("van_der_pol", "modified_vdp"):
            base = dict(dt=1e-3, dt_obs=0.1, init_box=((-1.0, 1.0),) * 2)
        else:
            raise ValueError(f"no protocol defaults for {system_name!r}")
        base.update(relax_steps_obs=100, points_per_traj=101 + m_max, n_traj=100, m_max=m_max)
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class TrajectoryDataset:
    """Post-relaxation trajectories, array of shape ``(n_traj, points, D)``."""

    system_name: str
    sigma: float
    dt_obs: float
    trajectories: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        arr = np.array(self.trajectories, dtype=float)
        if arr.ndim != 3:
            raise ValueError("trajectories must be a (n_traj, points, D) array")
        arr.flags.writeable = False
        object.__setattr__(self, "trajectories", arr)

    @property
    def n_traj(self) -> int:
        return self.trajectories.shape[0]

    @property
    def points_per_traj(self) -> int:
        return self.trajectories.shape[1]

    @property
    def dim(self) -> int:
        return self.trajectories.shape[2]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_obs * np.arange(self.points_per_traj)


@dataclass(frozen=True)
class SnapshotPairs:
    X: np.ndarray
    Y: np.ndarray
    dt_obs: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y, dtype=float)
        if X.shape != Y.shape or X.ndim != 2:
            raise ValueError(f"X {X.shape} and Y {Y.shape} must be matrices of equal shape")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return self.X.shape[0]


def euler_maruyama_step(system: SdeSystem, x, dt: float, noise) -> np.ndarray:
    """One step ``x + a(x) dt + sigma sqrt(dt) noise``; works row-wise on batches."""
    x = np.asarray(x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if x.shape[-1] != system.dim or noise.shape != x.shape:
        raise ValueError(f"state {x.shape} / noise {noise.shape} do not match dimension {system.dim}")
    out = x + system.drift_at(x) * dt
    if system.sigma:
        out = out + system.sigma * np.sqrt(dt) * noise
    return out


def trajectory_rng(seed: int, traj_index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one trajectory; ``stream`` separates train/test data."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, traj_index))
    return np.random.Generator(np.random.PCG64(ss))


def simulate_dataset(system: SdeSystem, cfg: SimConfig, stream: int = 0) -> TrajectoryDataset:
    """Simulate ``cfg.n_traj`` trajectories and keep the post-relaxation samples.

    Trajectories are advanced together as a batch, but every trajectory
    draws its initial point and its Wiener increments from its own stream,
    so results do not depend on how trajectories are grouped.
    """
    D = system.dim
    if len(cfg.init_box) != D:
        raise ValueError(f"init_box has {len(cfg.init_box)} intervals for dimension {D}")
    rngs = [trajectory_rng(cfg.seed, i, stream) for i in range(cfg.n_traj)]
    lo = np.array([b[0] for b in cfg.init_box])
    hi = np.array([b[1] for b in cfg.init_box])
    x = np.stack([r.uniform(lo, hi) for r in rngs])
    spo = cfg.steps_per_obs
    noisy = system.sigma > 0
    out = np.empty((cfg.n_traj, cfg.points_per_traj, D))
    n_intervals = cfg.relax_steps_obs + cfg.points_per_traj - 1
    for k in range(n_intervals + 1):
        if k >= cfg.relax_steps_obs:
            out[:, k - cfg.relax_steps_obs] = x
        if k == n_intervals:
            break
        if noisy:
            noise = np.stack([r.standard_normal((spo, D)) for r in rngs], axis=1)
        else:
            noise = np.zeros((spo,) + x.shape)
        for s in range(spo):
            x = euler_maruyama_step(system, x, cfg.dt, noise[s])
        bad = ~np.isfinite(x).all(axis=1)
        if bad.any():
            raise SimulationDivergence(int(np.flatnonzero(bad)[0]), (k + 1) * cfg.dt_obs)
    return TrajectoryDataset(system.name, system.sigma, cfg.dt_obs, out,
                             t0=cfg.relax_steps_obs * cfg.dt_obs)


def make_fullstate_pairs(ds: TrajectoryDataset) -> SnapshotPairs:
    if ds.n_traj == 0 or ds.points_per_traj < 2:
        raise ValueError("dataset has no adjacent rows to pair")
    tr = ds.trajectories
    X = tr[:, :-1].reshape(-1, ds.dim)
    Y = tr[:, 1:].reshape(-1, ds.dim)
    return SnapshotPairs(X, Y, ds.dt_obs, {"kind": "full_state"})


def delay_windows(series, M: int) -> np.ndarray:
    """Rows ``(s[t], s[t-1], ..., s[t-M])`` for every t >= M (newest first)."""
    series = np.asarray(series, dtype=float)
    return sliding_window_view(series, M + 1, axis=-1)[..., ::-1]


def make_delay_pairs(ds: TrajectoryDataset, observed_dim: int, M: int) -> SnapshotPairs:
    """Delay-history pairs of one coordinate; windows stay inside a trajectory."""
    if not 0 <= observed_dim < ds.dim:
        raise ValueError(f"observed_dim {observed_dim} out of range for dimension {ds.dim}")
    if M < 0 or ds.points_per_traj - M - 1 < 1:
        raise ValueError(f"M={M} too large for {ds.points_per_traj} points per trajectory")
    w = delay_windows(ds.trajectories[:, :, observed_dim], M)  # (n_traj, points - M, M + 1)
    X = w[:, :-1].reshape(-1, M + 1)
    Y = w[:, 1:].reshape(-1, M + 1)
    return SnapshotPairs(X, Y, ds.dt_obs, {"kind": "delay", "observed_dim": observed_dim, "M": M})


def latest_histories(ds: TrajectoryDataset, observed_dim: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Delay history ending at the last row of each trajectory, plus that full state."""
    if ds.points_per_traj < M + 1:
        raise ValueError(f"need at least {M + 1} points per trajectory")
    hist = ds.trajectories[:, ::-1, observed_dim][:, : M + 1]
    return np.ascontiguousarray(hist), ds.trajectories[:, -1, :].copy()
