"""Single-spin distributions: construction, cumulant machinery, GHS checks.

A measure is either atomic (finitely many symmetric atoms) or continuous
(even log-density on a symmetric interval).  All cumulant-generating-function
derivatives are computed from moments of the exponentially tilted measure via
the moment-to-cumulant recursion; finite differences are never the production
path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import comb

from ._quad import adaptive_quad, logsumexp, truncation_point

MAX_CGF_ORDER = 12

#: tolerance for the "weights sum to one" / unit-variance style invariants
ATOL_EXACT = 1e-12


class MeasureError(ValueError):
    """Raised when a measure descriptor violates a construction invariant."""


@dataclass(frozen=True)
class SpinMeasure:
    """A symmetric single-spin distribution.

    Atomic measures carry ``atoms`` as (location, weight) pairs; continuous
    measures carry a normalised ``log_density`` on [-support_bound,
    support_bound] (``inf`` allowed when ``decay_exponent > 2`` declares
    super-Gaussian tails, keeping the measure inside the admissible class).
    """

    kind: str  # "atomic" | "continuous"
    label: str
    atoms: Optional[tuple] = None
    log_density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    support_bound: float = math.inf
    decay_exponent: Optional[float] = None
    variance: float = field(default=0.0)

    def __post_init__(self):
        if self.kind == "atomic":
            xs = np.array([a[0] for a in self.atoms])
            ws = np.array([a[1] for a in self.atoms])
            if abs(ws.sum() - 1.0) > ATOL_EXACT:
                raise MeasureError("atom weights do not sum to 1")
            if np.any(ws < 0):
                raise MeasureError("negative atom weight")
            for x, w in self.atoms:
                partner = [v for (y, v) in self.atoms if abs(y + x) < ATOL_EXACT]
                if not partner or abs(partner[0] - w) > ATOL_EXACT:
                    raise MeasureError(f"atom at {x} has no mirror of equal weight")
            var = float(np.sum(ws * xs**2))
        elif self.kind == "continuous":
            if self.support_bound == math.inf and (
                self.decay_exponent is None or self.decay_exponent <= 2
            ):
                raise MeasureError(
                    "unbounded support requires a declared decay exponent > 2"
                )
            b = self._cut()
            mass = adaptive_quad(lambda x: np.exp(self.log_density(x)), -b, b)
            if abs(mass - 1.0) > 1e-9:
                raise MeasureError(f"density integrates to {mass}, not 1")
            sym = max(
                abs(self.log_density(t) - self.log_density(-t))
                for t in np.linspace(0.1, min(b, 10.0), 7)
            )
            if sym > 1e-10:
                raise MeasureError("log-density is not even")
            var = adaptive_quad(lambda x: x**2 * np.exp(self.log_density(x)), -b, b)
        else:
            raise MeasureError(f"unknown kind {self.kind!r}")
        if not (var > 0 and math.isfinite(var)):
            raise MeasureError("variance must be finite and positive")
        object.__setattr__(self, "variance", var)

    # -- helpers -----------------------------------------------------------

    def _cut(self, tilt: float = 0.0) -> float:
        """Integration cutoff for the (possibly tilted) density."""
        if math.isfinite(self.support_bound):
            return self.support_bound
        return truncation_point(lambda x: self.log_density(x) + tilt * abs(x))

    @property
    def essential_sup(self) -> float:
        if self.kind == "atomic":
            return max(abs(a[0]) for a in self.atoms)
        return self.support_bound

    def atom_arrays(self):
        xs = np.array([a[0] for a in self.atoms])
        ws = np.array([a[1] for a in self.atoms])
        return xs, ws

    def tilted_log_weights(self, s: float):
        """Unnormalised log-weights of the measure tilted by exp(s x) (atomic)."""
        xs, ws = self.atom_arrays()
        return xs, np.log(ws) + s * xs

    def to_descriptor(self) -> dict:
        return {"kind": self.label}


def _cumulants_from_raw_moments(m: np.ndarray) -> np.ndarray:
    """Cumulants kappa_1..kappa_N from raw moments m[1..N] (m[0] = 1)."""
    n = len(m) - 1
    kappa = np.zeros(n + 1)
    for r in range(1, n + 1):
        acc = m[r]
        for j in range(1, r):
            acc -= comb(r - 1, j - 1, exact=True) * kappa[j] * m[r - j]
        kappa[r] = acc
    return kappa


def cgf(m: SpinMeasure, s: float) -> float:
    """phi(s) = log integral of exp(s x) d rho(x)."""
    if m.kind == "atomic":
        _, lw = m.tilted_log_weights(s)
        return float(logsumexp(lw))
    b = m._cut(tilt=abs(s))
    peak = s * b if s != 0 else 0.0  # max-shift for large tilts
    shift = max(m.log_density(t) + s * t for t in np.linspace(-b, b, 65))
    val = adaptive_quad(lambda x: np.exp(m.log_density(x) + s * x - shift), -b, b)
    if val <= 0:
        raise MeasureError(f"tilted integral diverged or vanished at s={s}")
    _ = peak
    return math.log(val) + shift


def tilted_raw_moments(m: SpinMeasure, s: float, max_order: int) -> np.ndarray:
    """Raw moments (orders 0..max_order) of the exp(s x)-tilted measure."""
    if m.kind == "atomic":
        xs, lw = m.tilted_log_weights(s)
        lz = logsumexp(lw)
        w = np.exp(lw - lz)
        return np.array([np.sum(w * xs**r) for r in range(max_order + 1)])
    b = m._cut(tilt=abs(s))
    shift = max(m.log_density(t) + s * t for t in np.linspace(-b, b, 65))
    z = adaptive_quad(lambda x: np.exp(m.log_density(x) + s * x - shift), -b, b)
    out = [1.0]
    for r in range(1, max_order + 1):
        num = adaptive_quad(
            lambda x: x**r * np.exp(m.log_density(x) + s * x - shift), -b, b
        )
        out.append(num / z)
    return np.array(out)


def cgf_derivative(m: SpinMeasure, s: float, order: int) -> float:
    """d^order/ds^order of phi at s, via tilted moments + cumulant recursion."""
    if not 0 <= order <= MAX_CGF_ORDER:
        raise ValueError(f"order must be in 0..{MAX_CGF_ORDER}")
    if order == 0:
        return cgf(m, s)
    raw = tilted_raw_moments(m, s, order)
    return float(_cumulants_from_raw_moments(raw)[order])


@dataclass(frozen=True)
class GhsReport:
    holds: bool
    worst_point: float
    worst_value: float
    s_max: float
    grid_points: int
    tolerance: float = 1e-10


def check_ghs(m: SpinMeasure, s_max: float = 10.0, grid_points: int = 4096) -> GhsReport:
    """Grid check of the third-derivative inequality phi''' <= 0 on s >= 0.

    The checked domain is the grid [0, s_max]; `holds` certifies only that.
    """
    if s_max <= 0 or grid_points < 100:
        raise ValueError("need s_max > 0 and grid_points >= 100")
    grid = np.linspace(0.0, s_max, grid_points)
    vals = np.array([cgf_derivative(m, s, 3) for s in grid])
    i = int(np.argmax(vals))
    tol = 1e-10
    return GhsReport(
        holds=bool(vals[i] <= tol),
        worst_point=float(grid[i]),
        worst_value=float(vals[i]),
        s_max=s_max,
        grid_points=grid_points,
        tolerance=tol,
    )


def standardize(m: SpinMeasure) -> SpinMeasure:
    """Rescale to unit variance (the law of X / sd(X))."""
    sd = math.sqrt(m.variance)
    if abs(sd - 1.0) <= ATOL_EXACT:
        return m
    if m.kind == "atomic":
        atoms = tuple((x / sd, w) for (x, w) in m.atoms)
        return SpinMeasure(kind="atomic", label=m.label + "_std", atoms=atoms)
    old_ld = m.log_density
    log_sd = math.log(sd)
    return SpinMeasure(
        kind="continuous",
        label=m.label + "_std",
        log_density=lambda x: old_ld(x * sd) + log_sd,
        support_bound=m.support_bound / sd,
        decay_exponent=m.decay_exponent,
    )


# -- constructors ----------------------------------------------------------


def _gibbs_measure(coeffs: dict) -> SpinMeasure:
    """rho(dx) proportional to exp(-V(x)) for an even polynomial V."""
    powers = sorted(int(p) for p in coeffs)
    cs = {int(p): float(c) for p, c in coeffs.items()}
    if any(p % 2 for p in powers):
        raise MeasureError("potential must be an even polynomial")
    top = max(powers)
    if top <= 2 or cs[top] <= 0:
        raise MeasureError("potential needs positive leading coefficient of degree > 2")
    if any(c < 0 for p, c in cs.items() if p > 2):
        # V' convex on [0, inf) is required; nonnegative coefficients above
        # the quadratic term make that automatic.
        raise MeasureError("negative high-order coefficient breaks V' convexity")

    def neg_v(x):
        x = np.asarray(x, dtype=float)
        return -sum(c * x**p for p, c in cs.items())

    b = truncation_point(neg_v)
    log_z = math.log(adaptive_quad(lambda x: np.exp(neg_v(x)), -b, b))
    return SpinMeasure(
        kind="continuous",
        label="gibbs_density",
        log_density=lambda x: neg_v(x) - log_z,
        support_bound=math.inf,
        decay_exponent=float(top),
    )


def construct_measure(spec) -> SpinMeasure:
    """Build a SpinMeasure from a descriptor (dict or bare kind string)."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "bernoulli":
        return SpinMeasure(
            kind="atomic", label="bernoulli", atoms=((-1.0, 0.5), (1.0, 0.5))
        )
    if kind == "three_state":
        r3 = math.sqrt(3.0)
        return SpinMeasure(
            kind="atomic",
            label="three_state",
            atoms=((0.0, 2.0 / 3.0), (-r3, 1.0 / 6.0), (r3, 1.0 / 6.0)),
        )
    if kind == "trinomial":
        a = float(spec["a"])
        if not 0.0 <= a < 1.0:
            raise MeasureError("trinomial weight a must satisfy 0 <= a < 1")
        side = (1.0 - a) / 2.0
        atoms = ((-1.0, side), (1.0, side))
        if a > 0:
            atoms = ((0.0, a),) + atoms
        return SpinMeasure(kind="atomic", label=f"trinomial({a})", atoms=atoms)
    if kind == "uniform":
        a = float(spec.get("half_width", 1.0))
        if a <= 0:
            raise MeasureError("uniform half_width must be positive")
        log_h = -math.log(2.0 * a)
        return SpinMeasure(
            kind="continuous",
            label=f"uniform({a})",
            log_density=lambda x, _lh=log_h, _a=a: np.where(
                np.abs(x) <= _a, _lh, -np.inf
            ),
            support_bound=a,
        )
    if kind == "gibbs_density":
        return _gibbs_measure(spec["coefficients"])
    raise MeasureError(f"unknown measure kind {kind!r}")
