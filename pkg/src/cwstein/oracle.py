"""Exact finite-n computations by enumeration.

Whenever the interaction depends only on the total magnetisation, the law of
S_n is enumerated over type classes (atom occupation counts), which reduces
two-atom measures to O(n) support and three-atom measures to O(n^2)
compositions.  Full d^n sweeps are kept for site-resolved quantities
(correlation inequalities, non-uniform fields) under a hard budget.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .limit_laws import LimitLaw
from .measures import SpinMeasure

ENUMERATION_BUDGET = 10_000_000


class BudgetError(RuntimeError):
    """Requested enumeration exceeds the configured budget."""


@dataclass(frozen=True)
class ExactLaw:
    """The exact law of S_n: sorted support values and their probabilities."""

    support: np.ndarray
    probs: np.ndarray
    n: int
    beta: float
    label: str
    field: float = 0.0

    def __post_init__(self):
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise AssertionError("probabilities do not sum to 1")

    def cdf_left_right(self):
        """(F(s-), F(s)) at every support point."""
        cum = np.cumsum(self.probs)
        return np.concatenate([[0.0], cum[:-1]]), cum

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "prob"])
            for s, p in zip(self.support, self.probs):
                w.writerow([repr(float(s)), repr(float(p))])


def _aggregate(keys: np.ndarray, logw: np.ndarray) -> ExactLaw | tuple:
    """Group log-weights by magnetisation key with a stable logsumexp."""
    uniq, inv = np.unique(np.round(keys, 9), return_inverse=True)
    mx = np.full(len(uniq), -np.inf)
    np.maximum.at(mx, inv, logw)
    acc = np.zeros(len(uniq))
    np.add.at(acc, inv, np.exp(logw - mx[inv]))
    log_probs = mx + np.log(acc)
    shift = log_probs.max()
    probs = np.exp(log_probs - shift)
    probs /= probs.sum()
    return uniq, probs


def _compositions_log_weights(m: SpinMeasure, n: int, beta: float,
                              field: float):
    """(s values, log weights) over atom occupation-count classes."""
    xs, ws = m.atom_arrays()
    d = len(xs)
    if math.comb(n + d - 1, d - 1) > ENUMERATION_BUDGET:
        raise BudgetError(f"{math.comb(n + d - 1, d - 1)} compositions "
                          f"exceed the {ENUMERATION_BUDGET} budget")
    log_w = np.log(ws)
    all_s, all_lw = [], []

    def rec(atom: int, left: int, s: float, lw: float):
        if atom == d - 1:
            c = left
            lw_full = lw - gammaln(c + 1) + c * log_w[atom]
            s_full = s + c * xs[atom]
            all_s.append(s_full)
            all_lw.append(lw_full)
            return
        if atom == d - 2:
            # vectorise the last two atoms in one shot
            c = np.arange(left + 1)
            lw_vec = (lw - gammaln(c + 1) + c * log_w[atom]
                      - gammaln(left - c + 1) + (left - c) * log_w[atom + 1])
            s_vec = s + c * xs[atom] + (left - c) * xs[atom + 1]
            all_s.append(s_vec)
            all_lw.append(lw_vec)
        else:
            for c in range(left + 1):
                rec(atom + 1, left - c, s + c * xs[atom],
                    lw - gammaln(c + 1) + c * log_w[atom])

    base = gammaln(n + 1)
    if d == 1:
        all_s.append(np.array([n * xs[0]]))
        all_lw.append(np.array([base - gammaln(n + 1) + n * log_w[0]]))
    else:
        rec(0, n, 0.0, base)
    s = np.concatenate([np.atleast_1d(a) for a in all_s]).astype(float)
    lw = np.concatenate([np.atleast_1d(a) for a in all_lw]).astype(float)
    lw = lw + beta * s**2 / (2.0 * n) + beta * field * s
    return s, lw


def exact_law(m: SpinMeasure, n: int, beta: float,
              field: float = 0.0,
              fields: Optional[Sequence[float]] = None) -> ExactLaw:
    """Exact law of S_n under the mean-field Gibbs measure.

    ``field`` is a uniform external field (aggregated per type class);
    ``fields`` is a per-site vector and forces a full d^n sweep.
    """
    if m.kind != "atomic":
        raise ValueError("exact enumeration requires an atomic measure")
    if fields is not None:
        s, lw = _full_sweep_magnetization(m, n, beta, np.asarray(fields))
    else:
        s, lw = _compositions_log_weights(m, n, beta, field)
    support, probs = _aggregate(s, lw)
    return ExactLaw(support=support, probs=probs, n=n, beta=beta,
                    label=m.label, field=field)


# -- full configuration sweeps ---------------------------------------------


def _config_chunks(d: int, n: int, chunk: int = 1 << 15):
    """Yield (N_chunk, n) atom-index arrays covering all d^n configurations."""
    total = d**n
    if total > ENUMERATION_BUDGET:
        raise BudgetError(f"{total} configurations exceed the budget")
    powers = d ** np.arange(n)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        yield (idx[:, None] // powers[None, :]) % d


def _full_sweep_magnetization(m: SpinMeasure, n: int, beta: float,
                              fields: np.ndarray):
    xs, ws = m.atom_arrays()
    log_w = np.log(ws)
    ss, lws = [], []
    for cfg in _config_chunks(len(xs), n):
        spins = xs[cfg]
        s = spins.sum(axis=1)
        lw = log_w[cfg].sum(axis=1) + beta * s**2 / (2.0 * n) \
            + beta * spins @ fields
        ss.append(s)
        lws.append(lw)
    return np.concatenate(ss), np.concatenate(lws)


def _full_sweep_probs(m: SpinMeasure, n: int, beta: float,
                      fields: Optional[np.ndarray] = None):
    """(spins matrix, probabilities) of every configuration, materialised."""
    xs, ws = m.atom_arrays()
    if len(xs) ** n > ENUMERATION_BUDGET // 8:
        raise BudgetError("full configuration matrix exceeds the budget")
    log_w = np.log(ws)
    cfg = np.concatenate(list(_config_chunks(len(xs), n)))
    spins = xs[cfg]
    s = spins.sum(axis=1)
    lw = log_w[cfg].sum(axis=1) + beta * s**2 / (2.0 * n)
    if fields is not None:
        lw = lw + beta * spins @ np.asarray(fields, dtype=float)
    lw -= lw.max()
    p = np.exp(lw)
    p /= p.sum()
    return spins, p


def log_partition(m: SpinMeasure, n: int, beta: float,
                  fields: np.ndarray) -> float:
    """log of the field-tilted partition sum (up to the measure's base mass)."""
    xs, ws = m.atom_arrays()
    log_w = np.log(ws)
    best = -np.inf
    chunks = []
    for cfg in _config_chunks(len(xs), n):
        spins = xs[cfg]
        s = spins.sum(axis=1)
        lw = log_w[cfg].sum(axis=1) + beta * s**2 / (2.0 * n) \
            + beta * spins @ fields
        chunks.append(lw)
        best = max(best, float(lw.max()))
    acc = sum(float(np.sum(np.exp(lw - best))) for lw in chunks)
    return best + math.log(acc)


# -- distances and moments --------------------------------------------------


def exact_kolmogorov(law: ExactLaw, center: float, scale: float,
                     target: LimitLaw) -> float:
    """Exact sup-distance between the rescaled law's CDF and the target's."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    w = (law.support - center) / scale
    f_left, f_right = law.cdf_left_right()
    f_target = np.asarray(target.cdf(w))
    return float(np.max(np.maximum(np.abs(f_left - f_target),
                                   np.abs(f_right - f_target))))


def exact_moment(law: ExactLaw, center: float, scale: float,
                 order: int) -> float:
    if order > 16:
        raise ValueError("moment order capped at 16")
    w = (law.support - center) / scale
    return float(np.sum(law.probs * w**order))


def convolution_law_beta0(m: SpinMeasure, n: int) -> ExactLaw:
    """Independent-spin reference: the n-fold convolution of the atom law."""
    xs, ws = m.atom_arrays()
    support = {0.0: 1.0}
    for _ in range(n):
        nxt: dict = {}
        for s, p in support.items():
            for x, w in zip(xs, ws):
                key = round(s + x, 9)
                nxt[key] = nxt.get(key, 0.0) + p * w
        support = nxt
    keys = np.array(sorted(support))
    probs = np.array([support[k] for k in keys])
    return ExactLaw(support=keys, probs=probs / probs.sum(), n=n, beta=0.0,
                    label=m.label)


# -- correlation inequalities ----------------------------------------------


@dataclass(frozen=True)
class UrsellReport:
    sites: tuple
    ursell: float
    ghs2: float
    n: int
    beta: float


def ursell_check(m: SpinMeasure, n: int, beta: float,
                 sites: tuple, fields: Optional[Sequence[float]] = None,
                 ghs2_sites: Optional[tuple] = None) -> UrsellReport:
    """Exact 4-point Ursell function and a third log-partition derivative.

    The Ursell value uses the zero-field (or supplied-field) Gibbs law; the
    third derivative is taken at the same field point by Richardson-
    extrapolated central differences of the enumerated log partition sum.
    """
    i, j, k, l = sites
    base_fields = np.zeros(n) if fields is None else np.asarray(fields, float)
    spins, p = _full_sweep_probs(m, n, beta, base_fields)

    def corr(*idx):
        v = np.ones(len(p))
        for a in idx:
            v = v * spins[:, a]
        return float(np.sum(p * v))

    u4 = (corr(i, j, k, l)
          - corr(i, j) * corr(k, l)
          - corr(i, k) * corr(j, l)
          - corr(i, l) * corr(j, k))

    gsites = ghs2_sites if ghs2_sites is not None else (i, j, k)
    ghs2 = _third_derivative_logz(m, n, beta, base_fields, gsites)
    return UrsellReport(sites=tuple(sites), ursell=u4, ghs2=ghs2,
                        n=n, beta=beta)


def _third_derivative_logz(m: SpinMeasure, n: int, beta: float,
                           fields: np.ndarray, sites: tuple,
                           step: float = 1e-4) -> float:
    """d^3 log Z / dh_i dh_j dh_k by Richardson central differences."""

    def diff(h_sites, delta):
        if not h_sites:
            return lambda f0: log_partition(m, n, beta, f0)
        # build the +/- stencil over the remaining sites recursively
        rest = diff(h_sites[1:], delta)
        site = h_sites[0]

        def d(f0):
            up = f0.copy()
            up[site] += delta
            dn = f0.copy()
            dn[site] -= delta
            return (rest(up) - rest(dn)) / (2.0 * delta)

        return d

    def estimate(delta):
        return diff(list(sites), delta)(fields.astype(float))

    d1 = estimate(step)
    d2 = estimate(step / 2.0)
    return (4.0 * d2 - d1) / 3.0


# -- Hubbard-Stratonovich cross-check --------------------------------------


@dataclass(frozen=True)
class HubbardReport:
    sup_discrepancy: float
    normalization_gap: float
    grid: np.ndarray
    mixture_density: np.ndarray
    functional_density: np.ndarray


def hubbard_density_check(m: SpinMeasure, n: int, beta: float,
                          mcenter: float, gamma_exp: float,
                          grid_points: int = 512) -> HubbardReport:
    """Gaussian-smoothed exact law vs the free-energy functional density.

    Side (a): the law of (S_n - n mcenter)/n^gamma convolved with
    N(0, 1/(beta n^{2 gamma - 1})), a finite Gaussian mixture in closed form.
    Side (b): density proportional to exp(-n G(beta, s/n^{1-gamma} + mcenter))
    normalised by quadrature.  Reports the sup-norm gap on a shared grid.
    """
    from .free_energy import evaluate_G

    if not 0.0 < gamma_exp < 1.0:
        raise ValueError("gamma_exp must lie in (0, 1)")
    law = exact_law(m, n, beta)
    w = (law.support - n * mcenter) / n**gamma_exp
    var = 1.0 / (beta * n ** (2.0 * gamma_exp - 1.0))
    sd = math.sqrt(var)
    lo = float(w.min() - 6.0 * sd)
    hi = float(w.max() + 6.0 * sd)
    grid = np.linspace(lo, hi, grid_points)

    mix = np.sum(law.probs[None, :]
                 * np.exp(-(grid[:, None] - w[None, :]) ** 2 / (2.0 * var)),
                 axis=1) / math.sqrt(2.0 * math.pi * var)

    from scipy.integrate import quad

    scale = n ** (1.0 - gamma_exp)
    log_f = np.array([-n * evaluate_G(m, beta, s / scale + mcenter)
                      for s in grid])
    peak = float(log_f.max())
    z, _ = quad(lambda s: math.exp(-n * evaluate_G(m, beta, s / scale + mcenter)
                                   - peak), lo - 10 * sd, hi + 10 * sd,
                limit=400, epsabs=1e-14)
    func = np.exp(log_f - peak) / z

    norm_gap = abs(np.trapezoid(func, grid) - 1.0)
    return HubbardReport(sup_discrepancy=float(np.max(np.abs(mix - func))),
                         normalization_gap=float(norm_gap),
                         grid=grid, mixture_density=mix,
                         functional_density=func)
