"""Convergence-rate experiments: distances per n, log-log fits, regimes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import limit_laws, oracle, pair
from .limit_laws import LimitLaw
from .measures import SpinMeasure

DKW_CONFIDENCE = 0.99


class RateError(RuntimeError):
    pass


@dataclass(frozen=True)
class RatePoint:
    n: int
    distance: float
    method: str  # "exact" | "mc"
    std_error: float = 0.0
    usable: bool = True


@dataclass(frozen=True)
class RateFit:
    points: tuple
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "points": [{"n": p.n, "distance": p.distance, "method": p.method,
                        "std_error": p.std_error, "usable": p.usable}
                       for p in self.points],
        }


@dataclass(frozen=True)
class RegimeTag:
    name: str  # critical_window | sub_window | critical_rate | clt_window | clt_with_rate
    gamma: float
    exponent: float
    window_threshold: float
    rate_threshold: float


def classify_beta_regime(sign: int, exponent: float, gamma: float,
                         k: int = 2) -> RegimeTag:
    """Place beta_n = 1 + sign * gamma * n^{-exponent} on the scaling map.

    For minima of type k the window sits at exponent 1 - 1/k; faster decay
    keeps the critical limit (with the critical rate from exponent 1 on),
    slower decay restores the CLT (with the CLT rate below 1/2 - 1/(2k)).
    """
    if gamma < 0:
        raise RateError("gamma must be nonnegative")
    window = 1.0 - 1.0 / k
    rate_cut = 0.5 - 1.0 / (2 * k)
    if gamma == 0.0:
        name = "critical_rate"
    elif abs(exponent - window) <= 1e-12:
        name = "critical_window"
    elif exponent > window:
        name = "critical_rate" if exponent >= 1.0 else "sub_window"
    else:
        name = "clt_with_rate" if exponent < rate_cut else "clt_window"
    return RegimeTag(name=name, gamma=gamma * sign, exponent=exponent,
                     window_threshold=window, rate_threshold=rate_cut)


def dkw_band(count: int, confidence: float = DKW_CONFIDENCE) -> float:
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * count))


def empirical_kolmogorov(samples: np.ndarray, target: LimitLaw) -> float:
    s = np.sort(np.asarray(samples, dtype=float))
    n = len(s)
    f = np.asarray(target.cdf(s))
    lo = np.arange(0, n) / n
    hi = np.arange(1, n + 1) / n
    return float(np.max(np.maximum(np.abs(f - lo), np.abs(hi - f))))


def mc_kolmogorov(measure: SpinMeasure, n: int, beta: float,
                  regime: pair.Regime, target: LimitLaw,
                  sample_count: int, seed: int, chains: int = 256):
    """(distance, band) from equilibrated Gibbs samples of W."""
    if sample_count < 10_000:
        raise RateError("mc_kolmogorov needs at least 1e4 samples")
    ens = pair.Ensemble(measure, n, beta, chains, seed,
                        gamma_scale=regime.gamma_scale, center=regime.center)
    crit = 10 if abs(beta - 1.0) < 0.05 else 1
    ens.run(int(20 * n * math.log(max(n, 2))) * crit)
    out = []
    rounds = math.ceil(sample_count / chains)
    for _ in range(rounds):
        ens.run(n * crit)
        out.append(ens.W.copy())
    samples = np.concatenate(out)[:sample_count]
    d = empirical_kolmogorov(samples, target)
    band = dkw_band(sample_count)
    return d, band


def wasserstein_distance(support: np.ndarray, probs: np.ndarray,
                         center: float, scale: float,
                         target: LimitLaw, grid_points: int = 4001) -> float:
    """W1 = integral |F_n - F| over a grid covering both supports."""
    w = np.sort((np.asarray(support) - center) / scale)
    order = np.argsort((np.asarray(support) - center) / scale)
    p = np.asarray(probs)[order]
    lo = min(float(w.min()), -target.xmax) - 1.0
    hi = max(float(w.max()), target.xmax) + 1.0
    grid = np.linspace(lo, hi, grid_points)
    f_n = np.cumsum(p)[np.clip(np.searchsorted(w, grid, side="right") - 1,
                               -1, len(p) - 1)]
    f_n = np.where(np.searchsorted(w, grid, side="right") == 0, 0.0, f_n)
    f_t = np.asarray(target.cdf(grid))
    return float(np.trapezoid(np.abs(f_n - f_t), grid))


def fit_rate(points: Sequence[RatePoint]) -> RateFit:
    """OLS on (ln n, ln distance) over the usable points."""
    usable = [p for p in points if p.usable and p.distance > 0]
    if len(usable) < 4:
        raise RateError(f"need at least 4 usable points, got {len(usable)}")
    x = np.log([p.n for p in usable])
    y = np.log([p.distance for p in usable])
    if np.ptp(x) == 0:
        raise RateError("degenerate abscissa")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(points=tuple(points), slope=float(slope),
                   intercept=float(intercept), r_squared=r2)


def run_rate_experiment(measure: SpinMeasure, beta: float,
                        n_grid: Sequence[int], gamma_scale: float,
                        target, center: float = 0.0,
                        method: str = "exact",
                        beta_of_n=None,
                        mc_samples: int = 20_000, seed: int = 0,
                        csv_path=None, svg_path=None,
                        regime: Optional[pair.Regime] = None) -> RateFit:
    """Distance-vs-n sweep and its log-log fit.

    ``target`` is a LimitLaw or a callable n -> LimitLaw (for targets whose
    moments are n-dependent).  ``beta_of_n`` overrides beta per n for
    size-dependent temperature windows.
    """
    points = []
    for n in n_grid:
        b = float(beta_of_n(n)) if beta_of_n is not None else beta
        t = target(n) if callable(target) else target
        if method == "exact":
            law = oracle.exact_law(measure, n, b)
            d = oracle.exact_kolmogorov(law, n * center, n**gamma_scale, t)
            points.append(RatePoint(n=n, distance=d, method="exact"))
        elif method == "mc":
            reg = regime if regime is not None else pair.Regime(
                "sweep", 1.0, gamma_scale, t, t.psi, center)
            d, band = mc_kolmogorov(measure, n, b, reg, t, mc_samples,
                                    seed + n)
            points.append(RatePoint(n=n, distance=d, method="mc",
                                    std_error=band, usable=d > band))
        else:
            raise RateError(f"unknown method {method!r}")
    fit = fit_rate(points)
    if csv_path:
        write_points_csv(points, csv_path)
    if svg_path:
        plot_loglog(fit, svg_path)
    return fit


def write_points_csv(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "distance", "std_error", "method", "usable"])
        for p in points:
            w.writerow([p.n, repr(p.distance), repr(p.std_error),
                        p.method, int(p.usable)])


def plot_loglog(fit: RateFit, path):
    """Self-contained SVG log-log plot of the fit (no timestamp metadata)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # deterministic element ids so identical fits give identical bytes
    matplotlib.rcParams["svg.hashsalt"] = "rate-plot"
    fig, ax = plt.subplots(figsize=(5, 4))
    ns = np.array([p.n for p in fit.points if p.usable])
    ds = np.array([p.distance for p in fit.points if p.usable])
    ax.loglog(ns, ds, "o", label="measured")
    xs = np.linspace(math.log(ns.min()), math.log(ns.max()), 50)
    ax.loglog(np.exp(xs), np.exp(fit.slope * xs + fit.intercept), "-",
              label=f"slope {fit.slope:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("distance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
