"""Shared test oracles."""
import numpy as np


def random_stable_matrix(n: int, rng: np.random.Generator, margin: float = 0.5) -> np.ndarray:
    """Gaussian matrix shifted left so every eigenvalue has real part <= -margin, then scaled to unit 2-norm."""
    B = rng.normal(size=(n, n)) / np.sqrt(n)
    B = B - (np.linalg.eigvals(B).real.max() + margin) * np.eye(n)
    return B / np.linalg.norm(B, 2)


def expm_taylor(M: np.ndarray, terms: int = 40) -> np.ndarray:
    out = np.eye(len(M))
    term = np.eye(len(M))
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def random_split_instance(rng: np.random.Generator, n_max: int = 12):
    """(A, observed, c0) with dimension 3..n_max and a random non-trivial observed subset."""
    n = int(rng.integers(3, n_max + 1))
    A = random_stable_matrix(n, rng)
    k = int(rng.integers(1, n))
    observed = sorted(rng.choice(n, size=k, replace=False).tolist())
    c0 = rng.normal(size=n)
    return A, observed, c0
