"""Independent reference computations used only by the tests."""

from fractions import Fraction

import mpmath
import numpy as np
from scipy.integrate import quad


def nnls_bruteforce(A, b):
    """Exhaustive NNLS over every support set; returns (mu, residual)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    best = np.zeros(n)
    best_r = float(np.linalg.norm(b))
    for mask in range(1, 1 << n):
        idx = [j for j in range(n) if mask >> j & 1]
        sol = np.linalg.lstsq(A[:, idx], b, rcond=None)[0]
        if np.any(sol < 0):
            continue
        mu = np.zeros(n)
        mu[idx] = sol
        r = float(np.linalg.norm(A @ mu - b))
        if r < best_r:
            best, best_r = mu, r
    return best, best_r


def clasp_kappa_ref(tau, u):
    """Curvature of the critical clasp; rational arithmetic up to the final square root."""
    t, a = Fraction(tau), abs(Fraction(u))
    w = t - a
    den = 1 - w * w + w * a * (1 - a * a)
    if den == 0:
        return float("inf")
    rad = (1 - a * a * w * w) ** 3 * (1 - w * w)
    with mpmath.workdps(40):
        return float(mpmath.sqrt(mpmath.mpf(rad.numerator) / rad.denominator)
                     / (mpmath.mpf(den.numerator) / den.denominator))


def _kappa_float(tau, u):
    w = tau - abs(u)
    return np.sqrt((1 - u * u * w * w) ** 3 * (1 - w * w)) / (1 - w * w + w * abs(u) * (1 - u * u))


def clasp_integral_ref(tau, upper, weight):
    """QUADPACK reference for int_0^upper weight(u) / (kappa sqrt(1-u^2)) du."""
    f = lambda u: weight(u) / (_kappa_float(tau, u) * np.sqrt(1 - u * u))
    return quad(f, 0.0, upper, epsabs=1e-13, epsrel=1e-13, limit=500)[0]
