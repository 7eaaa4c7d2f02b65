"""Fit ``err(sigma) = a2 * sigma**a1 + a3`` by damped Gauss-Newton."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerLawFit:
    alpha1: float
    alpha2: float
    alpha3: float
    residual_rms: float
    n_points: int
    converged: bool = True
    identifiable: bool = True
    iterations: int = 0

    def __call__(self, sigma):
        return power_law(np.asarray(sigma, dtype=float), self.alpha1, self.alpha2, self.alpha3)


def power_law(sigma, a1, a2, a3):
    return a2 * np.power(sigma, a1) + a3


def _rms(sig, err, p) -> float:
    return float(np.sqrt(np.mean((err - power_law(sig, *p)) ** 2)))


def fit_power_law(sigmas, errors, max_iter: int = 200, rtol: float = 1e-10) -> PowerLawFit:
    """Least squares in linear space.

    Start: ``a3 = 0.9 min(err)``, then ``(a1, a2)`` from a log-log line
    through ``err - a3``.  Steps that do not lower the residual are halved.
    """
    sig = np.asarray(sigmas, dtype=float)
    err = np.asarray(errors, dtype=float)
    if sig.shape != err.shape or sig.ndim != 1:
        raise ValueError("sigmas and errors must be 1-D arrays of equal length")
    if len(np.unique(sig)) < 4:
        raise ValueError(f"need at least 4 distinct sigma values, got {len(np.unique(sig))}")
    if np.any(sig <= 0) or np.any(err <= 0):
        raise ValueError("sigmas and errors must be positive")

    if np.ptp(err) == 0:
        return PowerLawFit(float("nan"), 0.0, float(err.mean()), 0.0, len(err), True, False, 0)

    a3 = 0.9 * err.min()
    slope, intercept = np.polyfit(np.log(sig), np.log(err - a3), 1)
    p = np.array([slope, np.exp(intercept), a3])
    sse = np.sum((err - power_law(sig, *p)) ** 2)
    log_sig = np.log(sig)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        s_a1 = np.power(sig, p[0])
        r = err - power_law(sig, *p)
        J = np.column_stack([p[1] * s_a1 * log_sig, s_a1, np.ones_like(sig)])
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        lam = 1.0
        while lam > 1e-12:
            trial = p + lam * step
            trial_sse = np.sum((err - power_law(sig, *trial)) ** 2)
            if trial_sse <= sse:
                break
            lam *= 0.5
        else:
            converged = True  # no descent direction left at machine precision
            break
        change = np.max(np.abs(trial - p) / np.maximum(np.abs(p), 1e-300))
        p, sse = trial, trial_sse
        if change < rtol:
            converged = True
            break
    if not converged:
        warnings.warn(f"power-law fit did not converge in {max_iter} iterations; returning best iterate",
                      RuntimeWarning, stacklevel=2)
    return PowerLawFit(float(p[0]), float(p[1]), float(p[2]), _rms(sig, err, p), len(err), converged, True, it)
