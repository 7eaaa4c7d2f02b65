"""EDMD estimation of Koopman matrices and conditional-statistic prediction.

Convention: row ``i`` of ``K`` holds the expansion of the time-evolved
``psi_i`` in the dictionary, so ``(K psi)(x) ~= K @ psi(x)``.
"""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dictionary import Dictionary
from .simulate import SnapshotPairs


class RankDeficientError(np.linalg.LinAlgError):
    """Feature matrix lacks full column rank and no ridge was requested."""


@dataclass(frozen=True)
class EdmdOptions:
    ridge: float = 0.0
    solver: str = "orthogonal_decomposition"
    scale_features: bool = False

    def __post_init__(self):
        if not self.ridge >= 0:
            raise ValueError(f"ridge must be non-negative, got {self.ridge}")
        if self.solver not in ("orthogonal_decomposition", "normal_equations"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass(frozen=True)
class KoopmanMatrix:
    dictionary: Dictionary
    dt_obs: float
    K: np.ndarray
    ridge: float = 0.0
    data_hash: str = ""

    kind = "estimated"

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        n = len(self.dictionary)
        if K.shape != (n, n):
            raise ValueError(f"K has shape {K.shape}, dictionary has {n} elements")
        if not np.isfinite(K).all():
            raise ValueError("Koopman matrix has non-finite entries")
        K.flags.writeable = False
        object.__setattr__(self, "K", K)

    def power(self, steps: int) -> np.ndarray:
        return np.linalg.matrix_power(self.K, steps)

    def predict(self, target, points, steps: int = 1) -> np.ndarray:
        """``(K^steps psi(x))`` at the target's position, for each row of ``points``."""
        return predict_statistic(self, target, points, steps)

    def header(self) -> dict:
        return {"kind": self.kind, "dt_obs": self.dt_obs, "ridge": self.ridge, "data_hash": self.data_hash}


def pairs_hash(pairs: SnapshotPairs) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(pairs.X).tobytes())
    h.update(np.ascontiguousarray(pairs.Y).tobytes())
    return h.hexdigest()[:16]


def _solve_qr(F: np.ndarray, G: np.ndarray, ridge: float, labels: list[str]) -> np.ndarray:
    n = F.shape[1]
    if ridge > 0:
        F = np.vstack([F, np.sqrt(ridge) * np.eye(n)])
        G = np.vstack([G, np.zeros((n, G.shape[1]))])
    Q, R, piv = scipy.linalg.qr(F, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(F.shape) * np.finfo(float).eps * diag[0] if n else 0.0
    rank = int(np.sum(diag > tol))
    if rank < n:
        dropped = [labels[j] for j in piv[rank:]]
        raise RankDeficientError(
            f"feature matrix has rank {rank} < {n}; dependent columns: {', '.join(dropped)}"
        )
    B = np.empty((n, G.shape[1]))
    B[piv] = scipy.linalg.solve_triangular(R, Q.T @ G)
    return B


def _solve_normal(F: np.ndarray, G: np.ndarray, ridge: float) -> np.ndarray:
    gram = F.T @ F + ridge * np.eye(F.shape[1])
    try:
        c, low = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError:
        raise RankDeficientError("Gram matrix is not positive definite") from None
    if np.linalg.cond(gram) > 1 / np.finfo(float).eps:
        raise RankDeficientError("Gram matrix is numerically singular")
    return scipy.linalg.cho_solve((c, low), F.T @ G)


def fit_koopman(pairs: SnapshotPairs, dictionary: Dictionary,
                opts: EdmdOptions | None = None) -> KoopmanMatrix:
    """Least-squares Koopman matrix minimising ``sum ||psi(y) - K psi(x)||^2``."""
    opts = opts or EdmdOptions()
    if pairs.X.shape[1] != dictionary.n_vars:
        raise ValueError(f"pairs have {pairs.X.shape[1]} columns, dictionary has {dictionary.n_vars} variables")
    FX = dictionary.evaluate(pairs.X)
    FY = dictionary.evaluate(pairs.Y)
    if not (np.isfinite(FX).all() and np.isfinite(FY).all()):
        raise ValueError("non-finite dictionary features")
    n = len(dictionary)
    if len(pairs) < n:
        warnings.warn(f"{len(pairs)} snapshot pairs for {n} dictionary functions", stacklevel=2)
    scale = np.ones(n)
    if opts.scale_features:
        scale = np.abs(FX).max(axis=0)
        scale[scale == 0] = 1.0
        FX = FX / scale
        FY = FY / scale
    if opts.solver == "orthogonal_decomposition":
        B = _solve_qr(FX, FY, opts.ridge, dictionary.labels())
    else:
        B = _solve_normal(FX, FY, opts.ridge)
    K = B.T
    if opts.scale_features:
        K = scale[:, None] * K / scale[None, :]
    return KoopmanMatrix(dictionary, pairs.dt_obs, K, opts.ridge, pairs_hash(pairs))


def predict_statistic(km: KoopmanMatrix, target, x0, steps: int = 1) -> np.ndarray | float:
    """Estimate ``E[monomial(X(t + steps dt_obs)) | X(t) = x0]``.

    ``target`` is a multi-index of the dictionary; ``x0`` is one point or a
    batch of points.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    idx = km.dictionary.index(target)
    x0 = np.asarray(x0, dtype=float)
    row = np.linalg.matrix_power(km.K, steps)[idx]
    feats = km.dictionary.evaluate(x0)
    return feats @ row
