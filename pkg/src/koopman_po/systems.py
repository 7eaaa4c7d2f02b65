"""Polynomial-drift SDE models with common additive noise.

Drift components are stored as sparse multi-index polynomials so that the
backward generator can be assembled symbolically (see ``generator``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from numbers import Real
from typing import Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


def grlex_key(index: Sequence[int]) -> tuple:
    """Sort key: total degree first, then x_1-heavy monomials first.

    Reproduces the listing 1, x1, x2, x1^2, x1 x2, x2^2, x1^3, ...
    """
    return (sum(index), tuple(-n for n in index))


@dataclass(frozen=True)
class MultiIndexPolynomial:
    """Sparse multivariate polynomial ``sum_n c_n x^n``.

    Terms are kept in graded-lex order with zero coefficients removed.
    Build instances through :meth:`from_terms` rather than the constructor.
    """

    dim: int
    terms: tuple[tuple[MultiIndex, float], ...] = ()

    @classmethod
    def from_terms(cls, dim: int, terms: Mapping[Sequence[int], float]) -> "MultiIndexPolynomial":
        if dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        acc: dict[MultiIndex, float] = {}
        for idx, coeff in terms.items():
            idx = tuple(int(n) for n in idx)
            if len(idx) != dim:
                raise ValueError(f"multi-index {idx} does not have length {dim}")
            if any(n < 0 for n in idx):
                raise ValueError(f"negative exponent in {idx}")
            acc[idx] = acc.get(idx, 0.0) + float(coeff)
        kept = sorted(((k, v) for k, v in acc.items() if v != 0.0), key=lambda kv: grlex_key(kv[0]))
        return cls(dim, tuple(kept))

    @classmethod
    def monomial(cls, index: Sequence[int], coeff: float = 1.0) -> "MultiIndexPolynomial":
        return cls.from_terms(len(index), {tuple(index): coeff})

    @classmethod
    def zero(cls, dim: int) -> "MultiIndexPolynomial":
        return cls(dim, ())

    def as_dict(self) -> dict[MultiIndex, float]:
        return dict(self.terms)

    def coefficient(self, index: Sequence[int]) -> float:
        return self.as_dict().get(tuple(index), 0.0)

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(idx) for idx, _ in self.terms), default=-1)

    def __len__(self) -> int:
        return len(self.terms)

    def __call__(self, x) -> np.ndarray | float:
        """Evaluate at points of shape ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected trailing dimension {self.dim}, got {x.shape[-1]}")
        out = np.zeros(x.shape[:-1])
        for idx, coeff in self.terms:
            term = np.full(x.shape[:-1], coeff)
            for d, n in enumerate(idx):
                if n == 1:
                    term = term * x[..., d]
                elif n > 1:
                    term = term * x[..., d] ** n
            out = out + term
        return out if out.ndim else float(out)

    def _check(self, other: "MultiIndexPolynomial") -> None:
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, Real):
            other = MultiIndexPolynomial.from_terms(self.dim, {(0,) * self.dim: float(other)})
        if not isinstance(other, MultiIndexPolynomial):
            return NotImplemented
        self._check(other)
        acc = self.as_dict()
        for idx, c in other.terms:
            acc[idx] = acc.get(idx, 0.0) + c
        return MultiIndexPolynomial.from_terms(self.dim, acc)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Real):
            return MultiIndexPolynomial.from_terms(self.dim, {k: v * float(other) for k, v in self.terms})
        if not isinstance(other, MultiIndexPolynomial):
            return NotImplemented
        self._check(other)
        acc: dict[MultiIndex, float] = {}
        for i1, c1 in self.terms:
            for i2, c2 in other.terms:
                idx = tuple(a + b for a, b in zip(i1, i2))
                acc[idx] = acc.get(idx, 0.0) + c1 * c2
        return MultiIndexPolynomial.from_terms(self.dim, acc)

    __rmul__ = __mul__

    def derivative(self, d: int, order: int = 1) -> "MultiIndexPolynomial":
        """Partial derivative of the given order with respect to ``x_d``."""
        acc: dict[MultiIndex, float] = {}
        for idx, c in self.terms:
            n = idx[d]
            if n < order:
                continue
            factor = 1.0
            for k in range(order):
                factor *= n - k
            new = list(idx)
            new[d] -= order
            acc[tuple(new)] = acc.get(tuple(new), 0.0) + c * factor
        return MultiIndexPolynomial.from_terms(self.dim, acc)

    def truncate(self, max_degree: int) -> "MultiIndexPolynomial":
        return MultiIndexPolynomial(self.dim, tuple(t for t in self.terms if sum(t[0]) <= max_degree))


@dataclass(frozen=True)
class SdeSystem:
    """``dX = a(X) dt + sigma dW`` with polynomial drift ``a``."""

    name: str
    dim: int
    drift: tuple[MultiIndexPolynomial, ...]
    sigma: float = 0.0
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if len(self.drift) != self.dim:
            raise ValueError(f"drift has {len(self.drift)} components for dimension {self.dim}")
        if any(p.dim != self.dim for p in self.drift):
            raise ValueError("drift polynomial dimension mismatch")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        object.__setattr__(self, "params", dict(self.params))

    @property
    def drift_degree(self) -> int:
        return max(p.degree for p in self.drift)

    def with_sigma(self, sigma: float) -> "SdeSystem":
        return replace(self, sigma=float(sigma))

    def drift_at(self, x) -> np.ndarray:
        """Vectorised drift: ``x`` of shape ``(..., dim)`` -> same shape."""
        x = np.asarray(x, dtype=float)
        return np.stack([np.asarray(p(x), dtype=float) for p in self.drift], axis=-1)

    def key(self) -> tuple:
        """Hashable identity used for caching derived matrices."""
        return (self.name, self.dim, self.sigma, tuple(sorted(self.params.items())),
                tuple(p.terms for p in self.drift))


def eval_drift(system: SdeSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != system.dim:
        raise ValueError(f"state has length {x.shape[-1]}, system dimension is {system.dim}")
    return system.drift_at(x)


def _poly(dim, terms):
    return MultiIndexPolynomial.from_terms(dim, terms)


def make_van_der_pol(mu: float = 1.0, sigma: float = 0.0) -> SdeSystem:
    return make_modified_vdp(mu, 1, sigma, name="van_der_pol")


def make_modified_vdp(mu: float = 1.0, h_degree: int = 1, sigma: float = 0.0,
                      name: str = "modified_vdp") -> SdeSystem:
    """Van der Pol with the restoring force ``x1`` replaced by ``x1**h_degree``."""
    if h_degree not in (1, 3, 5):
        raise ValueError(f"h_degree must be 1, 3 or 5, got {h_degree}")
    drift = (
        _poly(2, {(0, 1): 1.0}),
        _poly(2, {(0, 1): mu, (2, 1): -mu, (h_degree, 0): -1.0}),
    )
    params = {"mu": float(mu)}
    if name != "van_der_pol":
        params["h_degree"] = float(h_degree)
    return SdeSystem(name, 2, drift, float(sigma), params)


def make_lorenz(nu: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0,
                sigma: float = 0.0) -> SdeSystem:
    drift = (
        _poly(3, {(0, 1, 0): nu, (1, 0, 0): -nu}),
        _poly(3, {(1, 0, 0): rho, (1, 0, 1): -1.0, (0, 1, 0): -1.0}),
        _poly(3, {(1, 1, 0): 1.0, (0, 0, 1): -beta}),
    )
    return SdeSystem("lorenz", 3, drift, float(sigma),
                     {"nu": float(nu), "rho": float(rho), "beta": float(beta)})


def make_ornstein_uhlenbeck(theta: float = 1.0, sigma: float = 0.0) -> SdeSystem:
    """``dX = -theta X dt + sigma dW``."""
    return SdeSystem("ornstein_uhlenbeck", 1, (_poly(1, {(1,): -theta}),), float(sigma),
                     {"theta": float(theta)})


def make_linear(matrix, sigma: float = 0.0, name: str = "linear") -> SdeSystem:
    """``dX = A X dt + sigma dW`` for a square matrix ``A``."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    dim = a.shape[0]
    unit = np.eye(dim, dtype=int)
    drift = tuple(_poly(dim, {tuple(unit[j]): a[i, j] for j in range(dim)}) for i in range(dim))
    return SdeSystem(name, dim, drift, float(sigma), {})


SYSTEM_NAMES = ("van_der_pol", "lorenz", "modified_vdp", "ornstein_uhlenbeck")


def make_system(name: str, params: Mapping[str, float] | None = None, sigma: float = 0.0) -> SdeSystem:
    """Construct a built-in system from its name and a parameter map."""
    params = dict(params or {})
    try:
        if name == "van_der_pol":
            return make_van_der_pol(sigma=sigma, **params)
        if name == "lorenz":
            return make_lorenz(sigma=sigma, **params)
        if name == "modified_vdp":
            if "h_degree" in params:
                params["h_degree"] = int(params["h_degree"])
            return make_modified_vdp(sigma=sigma, **params)
        if name == "ornstein_uhlenbeck":
            return make_ornstein_uhlenbeck(sigma=sigma, **params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name}: {exc}") from None
    raise ValueError(f"unknown system {name!r}; choose from {', '.join(SYSTEM_NAMES)}")
