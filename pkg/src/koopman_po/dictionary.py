"""Monomial dictionaries over state or delay variables."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .systems import MultiIndex


def _graded_indices(n_vars: int, max_degree: int) -> list[MultiIndex]:
    # combinations_with_replacement emits each degree block in the x1-first order
    out = []
    for k in range(max_degree + 1):
        for comb in itertools.combinations_with_replacement(range(n_vars), k):
            idx = [0] * n_vars
            for v in comb:
                idx[v] += 1
            out.append(tuple(idx))
    return out


@dataclass(frozen=True)
class Dictionary:
    """Ordered monomial basis; element 0 is always the constant function.

    ``kind`` is ``"full_state"`` (variables x_1..x_V) or ``"delay"``
    (variables z_1..z_{M+1}, newest first).
    """

    n_vars: int
    basis: tuple[MultiIndex, ...]
    kind: str = "full_state"
    max_degree: int = 0
    M: int | None = None

    def __post_init__(self):
        if not self.basis or any(self.basis[0]):
            raise ValueError("first basis element must be the constant")
        if len(set(self.basis)) != len(self.basis):
            raise ValueError("duplicate basis elements")
        object.__setattr__(self, "_lookup", {b: i for i, b in enumerate(self.basis)})

    def __len__(self) -> int:
        return len(self.basis)

    def index(self, multi_index) -> int:
        try:
            return self._lookup[tuple(multi_index)]
        except KeyError:
            raise KeyError(f"{tuple(multi_index)} is not in the dictionary") from None

    def __contains__(self, multi_index) -> bool:
        return tuple(multi_index) in self._lookup

    def unit(self, var: int, power: int = 1) -> MultiIndex:
        idx = [0] * self.n_vars
        idx[var] = power
        return tuple(idx)

    @property
    def linear_indices(self) -> list[int]:
        """Positions of the coordinate functions (the full-state observable)."""
        return [self.index(self.unit(v)) for v in range(self.n_vars) if self.unit(v) in self]

    @property
    def variable_prefix(self) -> str:
        return "z" if self.kind == "delay" else "x"

    def label(self, i: int) -> str:
        parts = []
        for v, n in enumerate(self.basis[i]):
            if n:
                parts.append(f"{self.variable_prefix}{v + 1}" + (f"^{n}" if n > 1 else ""))
        return "*".join(parts) or "1"

    def labels(self) -> list[str]:
        return [self.label(i) for i in range(len(self))]

    def evaluate(self, points) -> np.ndarray:
        """Feature matrix of shape ``(N, len(self))`` for points ``(N, n_vars)``."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.n_vars:
            raise ValueError(f"points have {pts.shape[1]} columns, dictionary has {self.n_vars} variables")
        top = max(sum(b) for b in self.basis)
        powers = np.ones((top + 1, pts.shape[0], self.n_vars))
        for k in range(1, top + 1):
            powers[k] = powers[k - 1] * pts
        out = np.ones((pts.shape[0], len(self.basis)))
        for i, idx in enumerate(self.basis):
            for v, n in enumerate(idx):
                if n:
                    out[:, i] *= powers[n, :, v]
        return out[0] if single else out

    def manifest(self) -> str:
        """Text listing of the multi-indices, one per line."""
        head = f"# kind={self.kind} n_vars={self.n_vars} max_degree={self.max_degree}"
        if self.M is not None:
            head += f" M={self.M}"
        return "\n".join([head] + [" ".join(map(str, b)) for b in self.basis]) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "Dictionary":
        meta: dict[str, str] = {}
        basis = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    meta[k] = v
                continue
            basis.append(tuple(int(t) for t in line.split()))
        n_vars = int(meta.get("n_vars", len(basis[0])))
        M = int(meta["M"]) if "M" in meta else None
        return cls(n_vars, tuple(basis), meta.get("kind", "full_state"),
                   int(meta.get("max_degree", max(sum(b) for b in basis))), M)


def monomial_dictionary(n_vars: int, max_degree: int) -> Dictionary:
    if n_vars < 1 or max_degree < 0:
        raise ValueError("need n_vars >= 1 and max_degree >= 0")
    return Dictionary(n_vars, tuple(_graded_indices(n_vars, max_degree)), "full_state", max_degree)


def delay_dictionary(M: int, max_degree: int = 2) -> Dictionary:
    """Monomials in the delay variables ``z_1 = x_d(t), ..., z_{M+1} = x_d(t - M dt_obs)``."""
    if max_degree not in (1, 2):
        raise ValueError(f"delay dictionary degree must be 1 or 2, got {max_degree}")
    if M < 0:
        raise ValueError("M must be non-negative")
    return Dictionary(M + 1, tuple(_graded_indices(M + 1, max_degree)), "delay", max_degree, M)


@dataclass(frozen=True)
class DualNormalization:
    """Diagonal of the pairing <n|m> = prod_d n_d! delta_nm."""

    z_diag: np.ndarray


def dual_normalization(dictionary: Dictionary) -> DualNormalization:
    z = np.array([float(np.prod([math.factorial(n) for n in b])) for b in dictionary.basis])
    z.flags.writeable = False
    return DualNormalization(z)
