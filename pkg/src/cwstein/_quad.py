"""Quadrature helpers shared by the measure and limit-law modules."""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

# Absolute tolerance for adaptive quadrature; CDF accuracy has to dominate
# the 1e-3-scale Kolmogorov distances measured downstream.
QUAD_ABS_TOL = 1e-12

# Integrands are truncated where they fall below this fraction of their peak.
TRUNCATION_RATIO = 1e-18

_GL_NODES, _GL_WEIGHTS = leggauss(32)


def adaptive_quad(f, lo: float, hi: float) -> float:
    """Adaptive quadrature of ``f`` on [lo, hi] with absolute tolerance 1e-12."""
    val, _ = integrate.quad(f, lo, hi, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)
    return val


def truncation_point(log_f, peak_x: float = 0.0, hint: float = 1.0) -> float:
    """Smallest x > peak_x beyond which exp(log_f) is below 1e-18 of its peak.

    ``log_f`` must be even-symmetric and eventually decreasing; used to clip
    infinite supports before quadrature.
    """
    peak = log_f(peak_x)
    cut = np.log(TRUNCATION_RATIO)
    x = max(hint, 1.0)
    while log_f(peak_x + x) - peak > cut:
        x *= 2.0
        if x > 1e8:
            raise ValueError("integrand does not decay; cannot truncate support")
    lo, hi = x / 2.0, x
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if log_f(peak_x + mid) - peak > cut:
            lo = mid
        else:
            hi = mid
    return peak_x + hi


def panel_integrate(f, edges: np.ndarray) -> np.ndarray:
    """32-node Gauss-Legendre integral of ``f`` over each panel [e_i, e_{i+1}].

    Returns the per-panel integrals; ``f`` must accept arrays.
    """
    a = edges[:-1]
    b = edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = f(x)
    return half * np.sum(vals * _GL_WEIGHTS[None, :], axis=1)


def gl_integrate(f, a, b):
    """Vectorised 32-node Gauss-Legendre integral of ``f`` on [a, b].

    ``a`` and ``b`` may be arrays of matching shape; exact to machine
    precision for smooth integrands on short panels.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[..., None] + half[..., None] * _GL_NODES
    return half * np.sum(f(x) * _GL_WEIGHTS, axis=-1)


def logsumexp(a, b=None):
    """log(sum(b * exp(a))) with max-shift; b defaults to ones."""
    a = np.asarray(a, dtype=float)
    m = np.max(a)
    if not np.isfinite(m):
        return m
    s = np.sum(np.exp(a - m) if b is None else b * np.exp(a - m))
    return m + np.log(s)
