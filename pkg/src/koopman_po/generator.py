"""Backward-Kolmogorov generator on a monomial dictionary and reference Koopman matrices.

The generator ``L = sum_d a_d d/dx_d + (sigma^2 / 2) sum_d d^2/dx_d^2`` maps a
polynomial to a polynomial; on a degree-``p`` dictionary every image term
of degree above ``p`` is dropped.  With ``dc/dt = A c`` for the coefficient
vector of an observable, ``A[i, j]`` is the coefficient of ``psi_i`` in
``L psi_j``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dictionary import Dictionary
from .edmd import KoopmanMatrix
from .systems import MultiIndexPolynomial, SdeSystem


@dataclass(frozen=True)
class GeneratorMatrix:
    dictionary: Dictionary
    A: np.ndarray
    system_name: str = ""
    sigma: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        A.flags.writeable = False
        object.__setattr__(self, "A", A)


@dataclass(frozen=True)
class ReferenceKoopman(KoopmanMatrix):
    method: str = "crank_nicolson"
    dt: float = 0.0
    sigma: float = 0.0

    kind = "reference"

    def header(self) -> dict:
        return {**super().header(), "method": self.method, "dt": self.dt, "sigma": self.sigma}


def apply_generator(system: SdeSystem, poly: MultiIndexPolynomial) -> MultiIndexPolynomial:
    """``L poly`` without truncation."""
    out = MultiIndexPolynomial.zero(system.dim)
    half_var = 0.5 * system.sigma**2
    for d, a_d in enumerate(system.drift):
        out = out + a_d * poly.derivative(d)
        if half_var:
            out = out + poly.derivative(d, 2) * half_var
    return out


def build_generator(system: SdeSystem, dictionary: Dictionary) -> GeneratorMatrix:
    if dictionary.kind != "full_state" or dictionary.n_vars != system.dim:
        raise ValueError("generator needs a full-state monomial dictionary over the system variables")
    n = len(dictionary)
    A = np.zeros((n, n))
    for j, idx in enumerate(dictionary.basis):
        image = apply_generator(system, MultiIndexPolynomial.monomial(idx))
        for term, coeff in image.terms:
            if term in dictionary:
                A[dictionary.index(term), j] = coeff
    return GeneratorMatrix(dictionary, A, system.name, system.sigma)


def _as_array(A) -> np.ndarray:
    return np.asarray(A.A if isinstance(A, GeneratorMatrix) else A, dtype=float)


class CrankNicolson:
    """Factorised ``(I - h/2 A)^{-1} (I + h/2 A)``; read-only after construction."""

    def __init__(self, A, dt: float):
        A = _as_array(A)
        n = A.shape[0]
        lhs = np.eye(n) - 0.5 * dt * A
        self.rhs = np.eye(n) + 0.5 * dt * A
        with warnings.catch_warnings():
            # an exactly singular pivot is reported below as LinAlgError
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self.lu = scipy.linalg.lu_factor(lhs, check_finite=True)
        pivots = np.abs(np.diag(self.lu[0]))
        if pivots.min() <= np.finfo(float).eps * max(pivots.max(), 1.0) * n:
            raise np.linalg.LinAlgError(f"Crank-Nicolson matrix is singular for dt={dt}")

    def step(self, c: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve(self.lu, self.rhs @ c)

    def propagate(self, c: np.ndarray, steps: int) -> np.ndarray:
        for _ in range(steps):
            c = self.step(c)
        return c


def propagate_coefficients_cn(A, c0, dt: float, steps: int) -> np.ndarray:
    """Integrate ``dc/dt = A c`` with Crank-Nicolson; ``c0`` may hold several columns."""
    c0 = np.asarray(c0, dtype=float)
    if c0.shape[0] != _as_array(A).shape[0]:
        raise ValueError(f"coefficient vector has length {c0.shape[0]}, generator has {_as_array(A).shape[0]}")
    if steps < 1:
        raise ValueError("steps must be positive")
    return CrankNicolson(A, dt).propagate(c0, steps)


def expm_times_vector(A, t: float, v) -> np.ndarray:
    """``exp(t A) v`` by scaling and squaring (scipy)."""
    A = _as_array(A)
    if not np.isfinite(A).all():
        raise ValueError("matrix has non-finite entries")
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(t * A)
        out = E @ np.asarray(v, dtype=float)
    if not np.isfinite(out).all():
        raise OverflowError(f"exp(tA) overflowed for t={t}, |A|={np.linalg.norm(A, 1):.3g}")
    return out


def reference_koopman(system: SdeSystem, dictionary: Dictionary, dt: float, dt_obs: float,
                      method: str = "crank_nicolson") -> ReferenceKoopman:
    """Koopman matrix over ``dt_obs`` from the generator (row i = evolved psi_i)."""
    steps = int(round(dt_obs / dt))
    if steps < 1 or abs(steps * dt - dt_obs) > 1e-9 * dt_obs:
        raise ValueError(f"dt={dt} does not divide dt_obs={dt_obs}")
    gen = build_generator(system, dictionary)
    eye = np.eye(len(dictionary))
    if method == "crank_nicolson":
        C = propagate_coefficients_cn(gen, eye, dt, steps)
    elif method == "matrix_exponential":
        C = expm_times_vector(gen, dt_obs, eye)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.isfinite(C).all():
        raise FloatingPointError("propagated coefficients are non-finite")
    return ReferenceKoopman(dictionary, dt_obs, C.T, method=method,
                            dt=dt if method == "crank_nicolson" else 0.0, sigma=system.sigma)


def rk4_flow(system: SdeSystem, x0, dt: float, steps: int) -> np.ndarray:
    """Classical RK4 on the drift field (noise ignored); batches along rows."""
    x = np.asarray(x0, dtype=float)
    f = system.drift_at
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.isfinite(x).all():
        raise FloatingPointError("RK4 state became non-finite")
    return x


def validate_against_rk4(ref: KoopmanMatrix, system: SdeSystem, points, dt: float) -> np.ndarray:
    """Per-coordinate MAE of one-step reference predictions against RK4."""
    points = np.asarray(points, dtype=float)
    steps = int(round(ref.dt_obs / dt))
    truth = rk4_flow(system, points, dt, steps)
    lin = ref.dictionary.linear_indices
    pred = ref.dictionary.evaluate(points) @ ref.K[lin].T
    return np.abs(pred - truth).mean(axis=0)
