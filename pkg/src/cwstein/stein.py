"""Stein-equation solutions for the limit laws and empirical bound constants.

The indicator solution f_z is evaluated through its two-branch closed form

    f_z(x) = (1 - P(z)) P(x) / p(x)   for x <= z
    f_z(x) = P(z) (1 - P(x)) / p(x)   for x >= z

assembled in log-space from stable tail ratios, so no branch ever multiplies
a huge exponential by an underflowing tail.  f_z' and (psi f_z)' come from
the Stein identity and the explicit product-rule formula, never from numeric
differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .limit_laws import LawError, LimitLaw

#: below this point the table-based CDF loses relative accuracy and the
#: Mills-quadrature tail ratio takes over
_TAIL_SWITCH = -1.0


class SteinGrid:
    """Cached log-CDF / log-density values of a law on a fixed x-grid."""

    def __init__(self, law: LimitLaw, x: np.ndarray):
        self.law = law
        self.x = np.asarray(x, dtype=float)
        self.log_p = law.log_density_unnorm(self.x) - math.log(law.Z)
        self.psi = law.psi(self.x)
        self.psi_prime = law.psi_prime(self.x)
        self.log_cdf = np.empty_like(self.x)
        deep = self.x < _TAIL_SWITCH
        for i in np.nonzero(deep)[0]:
            self.log_cdf[i] = math.log(law.lower_tail_ratio(self.x[i])) + self.log_p[i]
        self.log_cdf[~deep] = np.log(law.cdf(self.x[~deep]))
        # survival function by evenness: S(x) = P(-x)
        self.log_sf = np.empty_like(self.x)
        pos = -self.x < _TAIL_SWITCH
        for i in np.nonzero(pos)[0]:
            self.log_sf[i] = math.log(law.upper_tail_ratio(self.x[i])) + self.log_p[i]
        self.log_sf[~pos] = np.log(1.0 - law.cdf(self.x[~pos]))

    def f_z(self, iz: int) -> np.ndarray:
        """f_z over the whole grid for z = x[iz].

        The branch is chosen on the log scale first; the discarded branch's
        log value can be astronomically large, so it is never exponentiated.
        """
        left = self.log_sf[iz] + self.log_cdf - self.log_p
        right = self.log_cdf[iz] + self.log_sf - self.log_p
        return np.exp(np.where(self.x <= self.x[iz], left, right))

    def f_z_prime(self, iz: int, f: np.ndarray | None = None) -> np.ndarray:
        """f_z' from the Stein identity f' = -psi f + 1_{x<=z} - P(z)."""
        if f is None:
            f = self.f_z(iz)
        indicator = (self.x <= self.x[iz]).astype(float)
        return -self.psi * f + indicator - math.exp(self.log_cdf[iz])

    def psi_f_prime(self, iz: int, f: np.ndarray | None = None) -> np.ndarray:
        """(psi(x) f_z(x))' via the product formula, folded through f_z.

        (psi f_z)' = (psi' - psi^2) f_z + psi (1 - P(z)) on x <= z and
        (psi' - psi^2) f_z - psi P(z) on x >= z; f_z itself is the only
        tail-sensitive factor and is already stable.
        """
        if f is None:
            f = self.f_z(iz)
        sf_z = math.exp(self.log_sf[iz])
        cdf_z = math.exp(self.log_cdf[iz])
        jump = np.where(self.x <= self.x[iz], sf_z, -cdf_z)
        return (self.psi_prime - self.psi**2) * f + self.psi * jump


def solve_indicator(law: LimitLaw, z: float, x: float) -> float:
    """f_z(x) for the indicator test function h = 1_{. <= z}."""
    grid = SteinGrid(law, np.array([min(x, z), max(x, z)]))
    return float(grid.f_z(1 if x <= z else 0)[0 if x <= z else 1])


@dataclass(frozen=True)
class SmoothTestFunction:
    """A bounded-Lipschitz h with a known Lipschitz constant."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz: float


def default_h_family(omegas: Sequence[float] = (0.5, 1.0, 2.0)):
    """sin, tanh and clamped-linear test functions, odd and even flavours."""
    fam = []
    for w in omegas:
        fam.append(SmoothTestFunction(f"sin({w}x)",
                                      lambda x, w=w: np.sin(w * x), w))
        fam.append(SmoothTestFunction(f"tanh({w}x)",
                                      lambda x, w=w: np.tanh(w * x), w))
        fam.append(SmoothTestFunction(f"clamp({w}x)",
                                      lambda x, w=w: np.clip(w * x, -1.0, 1.0), w))
    return tuple(fam)


def expectation(law: LimitLaw, h) -> float:
    """P(h) = integral of h against the law's density."""
    val, _ = integrate.quad(lambda t: h(t) * float(law.density(t)),
                            -law.xmax, law.xmax, epsabs=1e-12, limit=200)
    return val


def solve_smooth(law: LimitLaw, h: SmoothTestFunction, x: float,
                 ph: float | None = None) -> float:
    """f_h(x) via the tail integral with the smaller-magnitude side.

    Both representations of the solution are equal; the left integral is
    stable for x <= 0 and the right one for x >= 0.
    """
    if ph is None:
        ph = expectation(law, h.fn)
    lx = float(law.log_density_unnorm(x))
    sign = 1.0 if x <= 0 else -1.0

    def integrand(u):
        t = x - u if x <= 0 else x + u
        return (float(h.fn(np.asarray(t))) - ph) * math.exp(
            float(law.log_density_unnorm(t)) - lx)

    hi = law.xmax + abs(x) + 10.0
    val, err = integrate.quad(integrand, 0.0, hi, epsabs=1e-11, limit=400)
    if not math.isfinite(val) or err > 1e-6:
        raise LawError(f"smooth Stein quadrature failed at x={x} (err={err})")
    return sign * val


@dataclass(frozen=True)
class BoundReport:
    """Empirical sups for the indicator (d1..d4) and smooth (c1..c3) bounds.

    The sups are over the recorded grids; the underlying constants are never
    asserted against unknown optimal values.
    """

    d1: float
    d2: float
    d3: float
    d4: float
    c1: float
    c2: float
    c3: float
    z_grid: np.ndarray = field(repr=False)
    x_grid: np.ndarray = field(repr=False)
    per_z: np.ndarray = field(repr=False)  # columns: z, sup f, sup |f'|, osc f', sup |(psi f)'|

    def to_dict(self):
        return {k: getattr(self, k)
                for k in ("d1", "d2", "d3", "d4", "c1", "c2", "c3")}


def estimate_bound_constants(
    law: LimitLaw,
    z_grid: np.ndarray | None = None,
    x_grid: np.ndarray | None = None,
    h_family=None,
) -> BoundReport:
    """Grid sups of |f_z|, |f_z'|, osc f_z', |(psi f_z)'| and the B1 ratios."""
    span = min(law.xmax + 2.0, 10.0)
    if x_grid is None:
        x_grid = np.linspace(-span, span, 4096)
    if z_grid is None:
        z_grid = np.linspace(-min(span, 6.0), min(span, 6.0), 512)
    if h_family is None:
        h_family = default_h_family()

    # evaluate on the union so every z is a grid point
    xs = np.unique(np.concatenate([x_grid, z_grid]))
    grid = SteinGrid(law, xs)
    z_idx = np.searchsorted(xs, z_grid)

    rows = []
    for iz in z_idx:
        f = grid.f_z(iz)
        fp = grid.f_z_prime(iz, f)
        pf = grid.psi_f_prime(iz, f)
        rows.append((xs[iz], np.max(f), np.max(np.abs(fp)),
                     np.max(fp) - np.min(fp), np.max(np.abs(pf))))
    per_z = np.array(rows)
    d1, d2, d3, d4 = per_z[:, 1:].max(axis=0)

    c1 = c2 = c3 = 0.0
    hx = np.linspace(-span, span, 257)
    for h in h_family:
        ph = expectation(law, h.fn)
        fh = np.array([solve_smooth(law, h, float(t), ph) for t in hx])
        hvals = h.fn(hx)
        psi = law.psi(hx)
        fhp = hvals - ph - psi * fh
        # h' needed pointwise only for f''; central differences of h are
        # exact enough (h is smooth except the clamp kinks, measure zero)
        eps = 1e-6
        hp = (h.fn(hx + eps) - h.fn(hx - eps)) / (2 * eps)
        fhpp = (psi**2 - law.psi_prime(hx)) * fh - psi * (hvals - ph) + hp
        c1 = max(c1, np.max(np.abs(fh)) / h.lipschitz)
        c2 = max(c2, np.max(np.abs(fhp)) / h.lipschitz)
        c3 = max(c3, np.max(np.abs(fhpp)) / h.lipschitz)

    return BoundReport(d1=float(d1), d2=float(d2), d3=float(d3), d4=float(d4),
                       c1=float(c1), c2=float(c2), c3=float(c3),
                       z_grid=np.asarray(z_grid), x_grid=np.asarray(x_grid),
                       per_z=per_z)


def ungl4_deviation(law: LimitLaw, z: float, x: float = 8.0):
    """Distance of 2k a_k x^{2k-1} f_z(x) from its two infinite-x limits.

    Returns (deviation at +x from P(z), deviation at -x from P(z) - 1).
    The finite-x correction of the product is of order x^{-2k}, so tight
    tolerances need large x for small k.
    """
    cp = law.canonical_power
    if cp is None:
        raise LawError("the product limit needs a pure-power law")
    k, a = cp
    grid = SteinGrid(law, np.array(sorted({-x, z, x})))
    iz = int(np.searchsorted(grid.x, z))
    f = grid.f_z(iz)
    p_z = float(law.cdf(z))
    prod_plus = 2 * k * a * x ** (2 * k - 1) * float(f[grid.x == x][0])
    prod_minus = 2 * k * a * (-x) ** (2 * k - 1) * float(f[grid.x == -x][0])
    return prod_plus - p_z, prod_minus - (p_z - 1.0)


@dataclass(frozen=True)
class TailSandwichReport:
    x: float
    lower: float
    tail_scaled: float
    upper: float
    holds: bool


def check_tail_sandwich(law: LimitLaw, x: float) -> TailSandwichReport:
    """Partial-integration sandwich on the upper tail of a pure-power law.

    All three quantities are reported after dividing out exp(-a_k x^{2k}),
    which keeps them O(1) at any x.
    """
    cp = law.canonical_power
    if cp is None:
        raise LawError("tail sandwich needs a pure-power law b_k exp(-a_k x^{2k})")
    if x <= 0:
        raise LawError("tail sandwich is for x > 0")
    k, a = cp
    b = law.b_k
    lower = b * x / (2 * k * a * x ** (2 * k) + 2 * k - 1)
    upper = min(0.5, b / (2 * k * a * x ** (2 * k - 1)))
    tail_scaled = b * law.upper_tail_ratio(x)
    tol = 1e-12 * max(1.0, tail_scaled)
    holds = (lower - tol <= tail_scaled <= upper + tol)
    return TailSandwichReport(x=x, lower=lower, tail_scaled=tail_scaled,
                              upper=upper, holds=bool(holds))
