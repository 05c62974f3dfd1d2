"""Exchangeable pair from single-site Gibbs resampling on mean-field spins.

One step of the heat-bath dynamics replaces a uniformly chosen spin by a draw
from its exact conditional law.  Per-configuration conditional moments of the
increment W - W' are closed-form sums over the atom values, which makes the
regression decomposition E[W - W'|F] = -lambda psi(W) + R exact by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import limit_laws
from .free_energy import g_derivative
from .limit_laws import LimitLaw
from .measures import MeasureError, SpinMeasure


class PairError(ValueError):
    pass


@dataclass(frozen=True)
class Regime:
    """Fixes the (lambda, psi, scaling, target law) of a regression regime."""

    name: str
    lam: float
    gamma_scale: float
    law: LimitLaw
    psi: Callable[[np.ndarray], np.ndarray]
    center: float = 0.0
    k: int = 1


def make_regime(kind: str, n: int, *, beta: float | None = None,
                k: int | None = None, mu: float | None = None,
                gamma: float | None = None, sigma2: float | None = None,
                center: float = 0.0) -> Regime:
    """Build the regime descriptor for a given scaling story.

    kind "clt":      lambda = 1/n,        W = (S - n c)/sqrt(n), psi = -x/sigma2
    kind "critical": lambda = n^{1/k - 2}, W = (S - n c)/n^{1-1/2k},
                     psi = -mu x^{2k-1}/(2k-1)!
    kind "window":   k = 2 with beta_n = 1 + gamma/sqrt(n); lambda = n^{-3/2},
                     psi = gamma x - x^3/3
    """
    if kind == "clt":
        if sigma2 is None or sigma2 <= 0:
            raise PairError("clt regime needs sigma2 > 0")
        law = limit_laws.gaussian(sigma2)
        return Regime("clt", 1.0 / n, 0.5, law, law.psi, center, 1)
    if kind == "critical":
        if k is None or k < 2 or mu is None or mu <= 0:
            raise PairError("critical regime needs k >= 2 and mu > 0")
        law = limit_laws.power(k, mu)
        return Regime("critical", float(n) ** (1.0 / k - 2.0),
                      1.0 - 1.0 / (2 * k), law, law.psi, center, k)
    if kind == "window":
        if gamma is None:
            raise PairError("window regime needs gamma")
        law = limit_laws.f_gamma(gamma)
        return Regime("window", float(n) ** -1.5, 0.75, law, law.psi, center, 2)
    raise PairError(f"unknown regime kind {kind!r}")


@dataclass
class SpinConfiguration:
    """A concrete spin assignment together with its scaling convention."""

    measure: SpinMeasure
    spins: np.ndarray
    beta: float
    model: str = "standard"  # "standard" keeps the self-interaction term
    gamma_scale: float = 0.5
    center: float = 0.0

    def __post_init__(self):
        if self.measure.kind != "atomic":
            raise PairError("dynamics requires an atomic spin measure")
        if self.model not in ("standard", "hat"):
            raise PairError(f"unknown model {self.model!r}")
        xs, _ = self.measure.atom_arrays()
        if not np.all(np.isin(self.spins, xs)):
            raise MeasureError("spin outside the measure support")
        self.spins = np.asarray(self.spins, dtype=float)

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def W(self) -> float:
        n = self.n
        return float((self.spins.sum() - n * self.center) / n**self.gamma_scale)


def _site_log_weights(config: SpinConfiguration, m_i: float) -> np.ndarray:
    """Unnormalised log conditional weights over atoms at local field m_i."""
    xs, ws = config.measure.atom_arrays()
    lw = np.log(ws) + config.beta * xs * m_i
    if config.model == "standard":
        lw = lw + config.beta * xs**2 / (2.0 * config.n)
    return lw


def _local_field(config: SpinConfiguration, i: int) -> float:
    return float((config.spins.sum() - config.spins[i]) / config.n)


def conditional_mean(config: SpinConfiguration, i: int) -> float:
    """E[X_i' | everything else], exact from the atom weights."""
    m_i = _local_field(config, i)
    xs, _ = config.measure.atom_arrays()
    lw = _site_log_weights(config, m_i)
    w = np.exp(lw - lw.max())
    return float(np.sum(w * xs) / w.sum())


def conditional_mean_hat_formula(config: SpinConfiguration, i: int) -> float:
    """Same value via m_i - G'(beta, m_i)/beta, valid for the hat model."""
    if config.model != "hat":
        raise PairError("the free-energy form of the conditional mean is "
                        "exact only without the self-interaction term")
    m_i = _local_field(config, i)
    b = config.beta
    return m_i - g_derivative(config.measure, b, m_i, 1) / b


def conditional_second(config: SpinConfiguration, i: int) -> float:
    """E[X_i'^2 | everything else]."""
    m_i = _local_field(config, i)
    xs, _ = config.measure.atom_arrays()
    lw = _site_log_weights(config, m_i)
    w = np.exp(lw - lw.max())
    return float(np.sum(w * xs**2) / w.sum())


def conditional_drift(config: SpinConfiguration) -> float:
    """E[W - W' | F], exact: averages (x_i - E x_i') over the chosen site."""
    n = config.n
    total = sum(config.spins[i] - conditional_mean(config, i) for i in range(n))
    return total / (n * n**config.gamma_scale)


def conditional_square(config: SpinConfiguration) -> float:
    """E[(W - W')^2 | F], exact per configuration."""
    n = config.n
    total = 0.0
    for i in range(n):
        x = config.spins[i]
        total += x * x - 2.0 * x * conditional_mean(config, i) \
            + conditional_second(config, i)
    return total / (n * n ** (2.0 * config.gamma_scale))


def gibbs_pair_step(config: SpinConfiguration, rng: np.random.Generator):
    """One heat-bath resampling; returns (W, W', new spin value, site)."""
    i = int(rng.integers(config.n))
    m_i = _local_field(config, i)
    lw = _site_log_weights(config, m_i)
    p = np.exp(lw - lw.max())
    p /= p.sum()
    xs, _ = config.measure.atom_arrays()
    x_new = float(xs[rng.choice(len(xs), p=p)])
    w = config.W
    w_prime = w + (x_new - config.spins[i]) / config.n**config.gamma_scale
    return w, w_prime, x_new, i


def decompose_regression(config: SpinConfiguration, regime: Regime):
    """(lambda, psi(W), R) with E[W - W'|F] = -lambda psi(W) + R exactly."""
    w = config.W
    drift = conditional_drift(config)
    psi_val = float(regime.psi(np.asarray(w)))
    return regime.lam, psi_val, drift + regime.lam * psi_val


class Ensemble:
    """Many independent Gibbs chains advanced in lock-step, vectorised.

    Spins are stored as atom indices in a (chains, n) array; the running
    magnetisation sums make each sweep O(chains) per site update.
    """

    def __init__(self, measure: SpinMeasure, n: int, beta: float,
                 chains: int, seed: int, model: str = "standard",
                 gamma_scale: float = 0.5, center: float = 0.0):
        if measure.kind != "atomic":
            raise PairError("dynamics requires an atomic spin measure")
        self.measure = measure
        self.n = n
        self.beta = beta
        self.model = model
        self.gamma_scale = gamma_scale
        self.center = center
        self.xs, self.ws = measure.atom_arrays()
        self.rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
        idx = self.rng.choice(len(self.xs), size=(chains, n), p=self.ws)
        self.idx = idx
        self.S = self.xs[idx].sum(axis=1)
        self.chains = chains
        self._rows = np.arange(chains)

    def _atom_logits(self, m: np.ndarray) -> np.ndarray:
        lw = np.log(self.ws)[None, :] + self.beta * np.outer(m, self.xs)
        if self.model == "standard":
            lw = lw + (self.beta * self.xs**2 / (2.0 * self.n))[None, :]
        return lw

    def _sample_atoms(self, m: np.ndarray) -> np.ndarray:
        lw = self._atom_logits(m)
        lw -= lw.max(axis=1, keepdims=True)
        p = np.exp(lw)
        cum = np.cumsum(p, axis=1)
        u = self.rng.random(len(m)) * cum[:, -1]
        return (u[:, None] > cum).sum(axis=1)

    def step(self):
        """One single-site update per chain."""
        i = self.rng.integers(self.n, size=self.chains)
        old = self.xs[self.idx[self._rows, i]]
        m = (self.S - old) / self.n
        new_idx = self._sample_atoms(m)
        self.idx[self._rows, i] = new_idx
        self.S += self.xs[new_idx] - old

    def run(self, steps: int):
        for _ in range(steps):
            self.step()

    @property
    def W(self) -> np.ndarray:
        return (self.S - self.n * self.center) / self.n**self.gamma_scale

    def pair_sample(self):
        """Propose one resampling per chain without committing it.

        Returns (W, W') of the exchangeable pair; the chain state is left
        unchanged, so thinning steps stay independent of the proposals.
        """
        i = self.rng.integers(self.n, size=self.chains)
        old = self.xs[self.idx[self._rows, i]]
        m = (self.S - old) / self.n
        new = self.xs[self._sample_atoms(m)]
        w = self.W
        return w, w + (new - old) / self.n**self.gamma_scale

    def conditional_profile(self):
        """Exact per-chain E[W - W'|F] and E[(W - W')^2|F], vectorised.

        For each chain, sums the conditional moments over every site using
        the running magnetisation.
        """
        n = self.n
        g = self.gamma_scale
        drift = np.zeros(self.chains)
        square = np.zeros(self.chains)
        for j, x in enumerate(self.xs):
            # all sites currently holding atom j share the same local field
            count = (self.idx == j).sum(axis=1)
            m = (self.S - x) / n
            lw = self._atom_logits(m)
            lw -= lw.max(axis=1, keepdims=True)
            p = np.exp(lw)
            p /= p.sum(axis=1, keepdims=True)
            mean = p @ self.xs
            second = p @ self.xs**2
            drift += count * (x - mean)
            square += count * (x * x - 2.0 * x * mean + second)
        return drift / (n * n**g), square / (n * n ** (2 * g))


@dataclass(frozen=True)
class PairStats:
    """Monte Carlo ingredients of the exchangeable-pair bounds."""

    regime: str
    lam: float
    n: int
    beta: float
    count: int
    e_w2: float
    e_w2_se: float
    e_w2k: float
    e_abs_psi: float
    e_abs_r: float
    e_r2: float
    sqrt_e_r2_over_lam: float
    half_lambda_dev: float  # sqrt E(1 - E[(W-W')^2|W]/(2 lambda))^2
    var_half: float         # Var(E[(W-W')^2|W]) / (2 lambda)^2
    antisymmetry: dict
    zweitesmoment_gap: float
    zweitesmoment_se: float
    a_bound: float
    warnings: tuple = field(default_factory=tuple)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__
             if k not in ("antisymmetry", "warnings")}
        d["antisymmetry"] = self.antisymmetry
        d["warnings"] = list(self.warnings)
        return d


def _mc(x: np.ndarray):
    """Mean and standard error of a (rounds, chains) sample array.

    Rows from one chain are autocorrelated despite thinning, so the error
    comes from the spread of the independent per-chain means.
    """
    x = np.atleast_2d(x)
    chain_means = x.mean(axis=0)
    return float(x.mean()), float(np.std(chain_means, ddof=1)
                                  / math.sqrt(x.shape[1]))


def pair_statistics(measure: SpinMeasure, n: int, beta: float, regime: Regime,
                    sample_count: int, seed: int, chains: int = 64,
                    model: str = "standard",
                    burn_in: Optional[int] = None,
                    thinning: Optional[int] = None) -> PairStats:
    """Equilibrated MC estimates of every bound ingredient, with pair draws."""
    ens = Ensemble(measure, n, beta, chains, seed, model,
                   regime.gamma_scale, regime.center)
    crit_factor = 10 if abs(beta - 1.0) < 0.05 else 1
    if burn_in is None:
        burn_in = int(20 * n * math.log(max(n, 2))) * crit_factor
    if thinning is None:
        thinning = n * crit_factor
    ens.run(burn_in)

    a_bound = 2.0 * measure.essential_sup / n**regime.gamma_scale
    rounds = max(1, math.ceil(sample_count / chains))
    ws, wps, drifts, squares = [], [], [], []
    for _ in range(rounds):
        ens.run(thinning)
        w, wp = ens.pair_sample()
        if np.any(np.abs(w - wp) > a_bound + 1e-12):
            raise AssertionError("pair increment exceeded the spin-range bound")
        d, s = ens.conditional_profile()
        ws.append(w)
        wps.append(wp)
        drifts.append(d)
        squares.append(s)
    # (rounds, chains) layout: columns are independent chains
    w = np.stack(ws)
    wp = np.stack(wps)
    drift = np.stack(drifts)
    square = np.stack(squares)

    psi_w = np.asarray(regime.psi(w), dtype=float)
    r = drift + regime.lam * psi_w

    e_w2, e_w2_se = _mc(w**2)
    e_w2k = float(np.mean(w ** (2 * regime.k)))
    e_abs_psi = float(np.mean(np.abs(psi_w)))
    e_abs_r = float(np.mean(np.abs(r)))
    e_r2 = float(np.mean(r**2))
    dev = 1.0 - square / (2.0 * regime.lam)
    half_lambda_dev = float(math.sqrt(np.mean(dev**2)))
    var_half = float(np.var(square, ddof=1) / (2.0 * regime.lam) ** 2)
    count = int(w.size)

    anti = {}
    for name, g in (("x-y", lambda a, b: a - b),
                    ("x^3-y^3", lambda a, b: a**3 - b**3),
                    ("sin", lambda a, b: np.sin(a) - np.sin(b))):
        m, se = _mc(g(w, wp))
        anti[name] = {"mean": m, "se": se}

    # E(W-W')^2 + 2 lambda E[W psi(W)] - 2 E[W R] should vanish
    gap_samples = (w - wp) ** 2 + 2.0 * regime.lam * w * psi_w - 2.0 * w * r
    gap, gap_se = _mc(gap_samples)

    warnings = ()
    half = w.shape[0] // 2
    if half >= 4:
        # first vs second half of each chain; disagreement beyond the
        # chain-to-chain spread hints at incomplete equilibration
        m1, se1 = _mc(w[:half] ** 2)
        m2, se2 = _mc(w[half:] ** 2)
        if abs(m1 - m2) > 6 * math.hypot(se1, se2):
            warnings = ("chain halves disagree on E[W^2]; "
                        "equilibration suspect",)

    return PairStats(regime=regime.name, lam=regime.lam, n=n, beta=beta,
                     count=count, e_w2=e_w2, e_w2_se=e_w2_se, e_w2k=e_w2k,
                     e_abs_psi=e_abs_psi, e_abs_r=e_abs_r, e_r2=e_r2,
                     sqrt_e_r2_over_lam=math.sqrt(e_r2) / regime.lam,
                     half_lambda_dev=half_lambda_dev, var_half=var_half,
                     antisymmetry=anti, zweitesmoment_gap=gap,
                     zweitesmoment_se=gap_se, a_bound=a_bound,
                     warnings=warnings)


@dataclass(frozen=True)
class ExactIngredients:
    """Bound ingredients computed exactly from the law of S (no MC).

    Valid for two-point spins, where both conditional moments of one Gibbs
    update are functions of the total magnetisation alone.
    """

    n: int
    beta: float
    lam: float
    e_w2: float
    e_abs_psi: float
    e_abs_r: float
    e_r2: float
    half_lambda_dev: float
    a_bound: float


def bernoulli_exact_ingredients(law, regime: Regime) -> ExactIngredients:
    """Exact per-magnetisation conditional moments for two-atom spins.

    ``law`` is the exact law of S; with x = +/-1, the site sums reduce to
    n+ tanh(beta (S-1)/n) +/- n- tanh(beta (S+1)/n).
    """
    n, beta = law.n, law.beta
    s = law.support
    p = law.probs
    n_plus = (n + s) / 2.0
    n_minus = (n - s) / 2.0
    t_up = np.tanh(beta * (s - 1.0) / n)
    t_dn = np.tanh(beta * (s + 1.0) / n)
    g = regime.gamma_scale
    w = (s - n * regime.center) / n**g
    # sum_i E[X_i'|F] and sum_i x_i E[X_i'|F]
    mean_sum = n_plus * t_up + n_minus * t_dn
    x_mean_sum = n_plus * t_up - n_minus * t_dn
    drift = (s - mean_sum) / (n * n**g)
    square = (2.0 * n - 2.0 * x_mean_sum) / (n * n ** (2.0 * g))
    psi_w = np.asarray(regime.psi(w), dtype=float)
    r = drift + regime.lam * psi_w
    dev = 1.0 - square / (2.0 * regime.lam)
    return ExactIngredients(
        n=n, beta=beta, lam=regime.lam,
        e_w2=float(np.sum(p * w**2)),
        e_abs_psi=float(np.sum(p * np.abs(psi_w))),
        e_abs_r=float(np.sum(p * np.abs(r))),
        e_r2=float(np.sum(p * r**2)),
        half_lambda_dev=float(math.sqrt(np.sum(p * dev**2))),
        a_bound=2.0 / n**g,
    )


def evaluate_bound_rhs(flavor: str, a: float, lam: float, *,
                       half_lambda_dev: float, e_r2: float,
                       e_w2: float = 0.0, e_abs_psi: float = 0.0,
                       sigma2: float = 1.0, constants=None,
                       tail_square: float = 0.0) -> float:
    """Numeric RHS of the Kolmogorov bounds.

    flavor "gaussian": explicit normal-target bound with sigma2.
    flavor "density":  general-density bound using empirical d1..d4.
    ``tail_square`` is E[(W-W')^2 1_{|W-W'| >= A}]; zero when A is the hard
    increment range.
    """
    if a <= 0 or lam <= 0:
        raise PairError("need A > 0 and lambda > 0")
    sqrt_r = math.sqrt(e_r2)
    if flavor == "gaussian":
        sigma = math.sqrt(sigma2)
        return (half_lambda_dev
                + (sigma * math.sqrt(2 * math.pi) / 4 + 1.5 * a) * sqrt_r / lam
                + (a**3 / lam) * (math.sqrt(2 * math.pi * sigma2) / 16
                                  + math.sqrt(e_w2) / 4)
                + 1.5 * a * math.sqrt(e_w2))
    if flavor == "density":
        if constants is None:
            raise PairError("density flavor needs a BoundReport")
        c = constants
        return (c.d2 * half_lambda_dev
                + (c.d1 + 1.5 * a) * sqrt_r / lam
                + c.d4 * a**3 / (4 * lam)
                + 1.5 * a * e_abs_psi
                + c.d3 / (2 * lam) * tail_square)
    raise PairError(f"unknown bound flavor {flavor!r}")
