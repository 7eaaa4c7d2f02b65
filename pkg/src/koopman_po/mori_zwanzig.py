"""Observed/unobserved splitting of linear coefficient dynamics.

For ``dc/dt = A c`` partitioned into observed (O) and unobserved (U)
blocks, the observed coefficients obey

    dc_O/dt = L_OO c_O(t) - int_0^t K_mem(t - s) c_O(s) ds + f(t)

with ``K_mem(s) = -L_OU exp(s L_UU) L_UO`` and
``f(t) = L_OU exp(t L_UU) c_U(0)``.  This is an identity, so integrating it
must reproduce the observed block of ``exp(t A) c(0)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .generator import GeneratorMatrix


class GleInstabilityError(FloatingPointError):
    pass


@dataclass(frozen=True)
class MzSplit:
    observed: tuple[int, ...]
    unobserved: tuple[int, ...]
    L_OO: np.ndarray
    L_OU: np.ndarray
    L_UO: np.ndarray
    L_UU: np.ndarray
    z_diag: np.ndarray | None = None

    @property
    def n_obs(self) -> int:
        return len(self.observed)


def split_generator(A, observed, z_diag=None) -> MzSplit:
    mat = np.asarray(A.A if isinstance(A, GeneratorMatrix) else A, dtype=float)
    n = mat.shape[0]
    obs = [int(i) for i in observed]
    if not obs:
        raise ValueError("observed set is empty")
    if len(set(obs)) != len(obs):
        raise ValueError(f"duplicate observed indices in {obs}")
    if any(not 0 <= i < n for i in obs):
        raise ValueError(f"observed indices out of range 0..{n - 1}")
    obs = sorted(obs)
    unobs = [i for i in range(n) if i not in set(obs)]
    if not unobs:
        raise ValueError("observed set covers every basis element; nothing left to eliminate")
    o, u = np.array(obs), np.array(unobs)
    return MzSplit(tuple(obs), tuple(unobs), mat[np.ix_(o, o)], mat[np.ix_(o, u)],
                   mat[np.ix_(u, o)], mat[np.ix_(u, u)],
                   None if z_diag is None else np.asarray(z_diag, dtype=float))


def _expm(M: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(M)
    if not np.isfinite(E).all():
        raise OverflowError("matrix exponential overflowed")
    return E


def memory_kernel(split: MzSplit, s: float) -> np.ndarray:
    if s < 0:
        raise ValueError("lag must be non-negative")
    return -split.L_OU @ _expm(s * split.L_UU) @ split.L_UO


def noise_term(split: MzSplit, c_U0, t: float) -> np.ndarray:
    c_U0 = np.asarray(c_U0, dtype=float)
    if c_U0.shape != (len(split.unobserved),):
        raise ValueError(f"c_U0 has shape {c_U0.shape}, expected ({len(split.unobserved)},)")
    if t < 0:
        raise ValueError("t must be non-negative")
    return split.L_OU @ (_expm(t * split.L_UU) @ c_U0)


@dataclass(frozen=True)
class GleSolution:
    times: np.ndarray
    c_O: np.ndarray
    markov: np.ndarray
    memory: np.ndarray
    noise: np.ndarray
    observed: tuple[int, ...] = ()

    @property
    def derivative(self) -> np.ndarray:
        return self.markov + self.memory + self.noise


def integrate_gle(split: MzSplit, c_O0, c_U0, t_end: float, dt: float,
                  growth_bound: float = 1e6) -> GleSolution:
    """Trapezoidal stepping with trapezoidal convolution over the stored history.

    The new value enters the update linearly (through ``L_OO`` and the
    ``K_mem(0)`` endpoint weight), so each step is one small linear solve.
    Kernel values are computed once per lag; the memory integral at step n
    costs O(n), so the whole run is O(n^2).
    """
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * t_end:
        raise ValueError(f"dt={dt} does not divide t_end={t_end}")
    c0 = np.asarray(c_O0, dtype=float)
    cu = np.asarray(c_U0, dtype=float)
    n_obs = split.n_obs
    if c0.shape != (n_obs,) or cu.shape != (len(split.unobserved),):
        raise ValueError("initial coefficient vectors do not match the split")

    times = dt * np.arange(n_steps + 1)
    # kernel[k] = K_mem(k dt); noise[k] = f(k dt)
    kernel = np.empty((n_steps + 1, n_obs, n_obs))
    noise = np.empty((n_steps + 1, n_obs))
    for k in range(n_steps + 1):
        E = _expm(times[k] * split.L_UU) if k else np.eye(len(split.unobserved))
        kernel[k] = -split.L_OU @ E @ split.L_UO
        noise[k] = split.L_OU @ (E @ cu)

    M = split.L_OO
    C = np.zeros((n_steps + 1, n_obs))
    markov = np.zeros_like(C)
    memory = np.zeros_like(C)
    C[0] = c0
    markov[0] = M @ c0
    ref_norm = max(np.linalg.norm(np.concatenate([c0, cu])), np.finfo(float).tiny)
    lhs = scipy.linalg.lu_factor(np.eye(n_obs) - 0.5 * dt * M + 0.25 * dt * dt * kernel[0])

    def history_part(n: int) -> np.ndarray:
        # trapezoid sum for int_0^{t_n} without the s = t_n endpoint
        w = np.ones(n)
        w[0] = 0.5
        return dt * np.einsum("k,kab,kb->a", w, kernel[n:0:-1], C[:n])

    F = markov[0] + noise[0]
    for n in range(n_steps):
        partial = history_part(n + 1)
        rhs = C[n] + 0.5 * dt * (F - partial + noise[n + 1])
        C[n + 1] = scipy.linalg.lu_solve(lhs, rhs)
        if not np.isfinite(C[n + 1]).all() or np.linalg.norm(C[n + 1]) > growth_bound * ref_norm:
            raise GleInstabilityError(
                f"observed coefficients grew beyond {growth_bound:g}x at t={times[n + 1]:.4g}")
        markov[n + 1] = M @ C[n + 1]
        memory[n + 1] = -(partial + 0.5 * dt * kernel[0] @ C[n + 1])
        F = markov[n + 1] + memory[n + 1] + noise[n + 1]
    return GleSolution(times, C, markov, memory, noise, split.observed)


def rescale_unobserved(A, split_observed, z_diag) -> np.ndarray:
    """Similarity transform ``S A S^-1`` with ``S = diag(1 on O, z on U)``.

    Expressing unobserved coefficients in the factorial-normalised dual
    basis; observed-block dynamics are unchanged by it.
    """
    mat = np.asarray(A.A if isinstance(A, GeneratorMatrix) else A, dtype=float)
    s = np.asarray(z_diag, dtype=float).copy()
    s[list(split_observed)] = 1.0
    return (s[:, None] * mat) / s[None, :]
