"""The free-energy functional G(beta, s), its minima, and their (k, mu) types."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .measures import MAX_CGF_ORDER, SpinMeasure, cgf, cgf_derivative

#: threshold on normalised Taylor coefficients separating true zeros
#: (symmetric cumulant cancellations) from genuinely nonzero ones
TYPE_COEFF_TOL = 1e-8

#: tie tolerance on G values when flagging global minima
GLOBAL_TIE_TOL = 1e-10

MAX_TYPE = MAX_CGF_ORDER // 2


class MinimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtremalPoint:
    alpha: float
    type_k: int
    strength_mu: float
    is_global: bool
    g_value: float

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "k": self.type_k,
            "mu": self.strength_mu,
            "global": self.is_global,
            "g": self.g_value,
        }


@dataclass(frozen=True)
class FreeEnergyProfile:
    beta: float
    minima: tuple
    maximal_type: int

    def to_dict(self):
        return {
            "beta": self.beta,
            "minima": [p.to_dict() for p in self.minima],
            "k_star": self.maximal_type,
        }


def evaluate_G(m: SpinMeasure, beta: float, s: float) -> float:
    """G(beta, s) = beta s^2 / 2 - phi(beta s)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return beta * s * s / 2.0 - cgf(m, beta * s)


def g_derivative(m: SpinMeasure, beta: float, s: float, order: int = 1) -> float:
    """d^order/ds^order of G(beta, s)."""
    if order == 1:
        return beta * s - beta * cgf_derivative(m, beta * s, 1)
    if order == 2:
        return beta - beta**2 * cgf_derivative(m, beta * s, 2)
    return -(beta**order) * cgf_derivative(m, beta * s, order)


def critical_beta(m: SpinMeasure) -> float:
    """beta_c = 1 / Var(X_1)."""
    return 1.0 / m.variance


def classify_extremal(m: SpinMeasure, beta: float, alpha: float) -> ExtremalPoint:
    """Type k and strength mu of a stationary point alpha of G(beta, .).

    k is the smallest j >= 1 whose order-2j Taylor coefficient of G at alpha
    exceeds the type threshold; mu comes from the closed formulas and is
    cross-checked against the Taylor coefficient itself.
    """
    for j in range(1, MAX_TYPE + 1):
        coeff = g_derivative(m, beta, alpha, 2 * j) / math.factorial(2 * j)
        if coeff > TYPE_COEFF_TOL:
            if j == 1:
                mu = beta - beta**2 * cgf_derivative(m, beta * alpha, 2)
            else:
                mu = -(beta ** (2 * j)) * cgf_derivative(m, beta * alpha, 2 * j)
            taylor_mu = coeff * math.factorial(2 * j)
            if abs(mu - taylor_mu) > 1e-8 * max(1.0, abs(mu)):
                raise MinimizationError(
                    f"closed-form strength {mu} disagrees with Taylor value {taylor_mu}"
                )
            return ExtremalPoint(
                alpha=float(alpha),
                type_k=j,
                strength_mu=float(mu),
                is_global=False,
                g_value=float(evaluate_G(m, beta, alpha)),
            )
        if coeff < -TYPE_COEFF_TOL:
            raise MinimizationError(f"point {alpha} is not a minimum (negative 2{j}-coefficient)")
    raise MinimizationError(f"type exceeds supported order {MAX_TYPE}")


def _newton_refine(m: SpinMeasure, beta: float, x0: float, lo: float, hi: float) -> float:
    x = x0
    for _ in range(100):
        g1 = g_derivative(m, beta, x, 1)
        if abs(g1) < 1e-12:
            return x
        g2 = g_derivative(m, beta, x, 2)
        step = g1 / g2 if g2 != 0 else math.copysign(1e-3, g1)
        xn = x - step
        if not lo <= xn <= hi:  # fall back to bisection inside the bracket
            xn = 0.5 * (lo + hi)
        if g_derivative(m, beta, lo, 1) * g_derivative(m, beta, xn, 1) <= 0:
            hi = xn
        else:
            lo = xn
        x = xn
    raise MinimizationError(f"Newton did not converge in bracket [{lo}, {hi}]")


def _cluster_representative(m: SpinMeasure, beta: float,
                            cluster: List[float], noise_floor: float) -> float:
    """One stationary point per noise-flat cluster; snap to 0 when the
    derivative stays at noise level all the way to the origin."""
    nearest = min(cluster, key=abs)
    path = np.linspace(0.0, nearest, 33)
    if max(abs(g_derivative(m, beta, s, 1)) for s in path) < noise_floor:
        return 0.0
    return float(np.mean(cluster))


def find_minima(
    m: SpinMeasure,
    beta: float,
    search_half_width: float | None = None,
    grid_points: int = 8192,
) -> FreeEnergyProfile:
    """All local minima of s -> G(beta, s) on [-w, w], typed and flagged."""
    if search_half_width is None:
        w = max(1.0, m.essential_sup)
        if beta < 1.0:
            w = max(w, (1.0 - beta) ** -0.5)
        search_half_width = 4.0 * w
    grid = np.linspace(-search_half_width, search_half_width, grid_points)
    g1 = np.array([g_derivative(m, beta, s, 1) for s in grid])

    roots: List[float] = []
    for i in range(len(grid) - 1):
        a, b = g1[i], g1[i + 1]
        if a == 0.0 and grid[i] not in roots:
            roots.append(grid[i])
        elif a < 0.0 <= b:  # sign change upward => local minimum inside
            roots.append(_newton_refine(m, beta, 0.5 * (grid[i] + grid[i + 1]),
                                        grid[i], grid[i + 1]))
    # an exact grid zero with positive curvature is a minimum too (s = 0 case)
    cleaned: List[float] = []
    for r in sorted(roots):
        if abs(r) < 1e-12:
            r = 0.0
        if not cleaned or abs(r - cleaned[-1]) > 1e-9:
            cleaned.append(float(r))

    # High-type minima are so flat that G' sits below float noise in a whole
    # neighbourhood, producing several sign-change roots per true minimum.
    # Merge roots not separated by a macroscopic |G'| excursion.
    merged: List[float] = []
    cluster = []
    noise_floor = 1e-12
    for r in cleaned:
        if not cluster:
            cluster = [r]
            continue
        between = np.linspace(cluster[-1], r, 33)
        if max(abs(g_derivative(m, beta, s, 1)) for s in between) < noise_floor:
            cluster.append(r)
        else:
            merged.append(_cluster_representative(m, beta, cluster, noise_floor))
            cluster = [r]
    if cluster:
        merged.append(_cluster_representative(m, beta, cluster, noise_floor))

    points = [classify_extremal(m, beta, r) for r in merged]
    if not points:
        raise MinimizationError("no minima found in search interval")
    g_min = min(p.g_value for p in points)
    flagged = tuple(
        ExtremalPoint(p.alpha, p.type_k, p.strength_mu,
                      bool(p.g_value <= g_min + GLOBAL_TIE_TOL), p.g_value)
        for p in points
    )
    k_star = max(p.type_k for p in flagged if p.is_global)
    return FreeEnergyProfile(beta=beta, minima=flagged, maximal_type=k_star)
