"""
Parameter sweeps, training-length search, CDFs over user drops and
power-scaling studies.

Every study returns an :class:`ExperimentRecord`: a fixed set of named
columns, one row per grid point, plus derived scalars. Grid points and drops
are evaluated independently (optionally on a thread pool) and always come
back in grid order; Monte-Carlo points get their own seed derived from the
study seed and the point index.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytics, simulator
from .channel import (CellGeometry, ConfigError, FadingProfile, SystemParams,
                      draw_user_drop, estimation_moments)

VARIABLES = ("M", "tau", "snr")
ENGINES = ("closed_form", "monte_carlo", "both")
PROTOCOLS = ("multi_way", "two_way")
DEFAULT_SNR_GRID_DB = (-10.0, -5.0, 0.0, 5.0, 10.0)
REGIMES = ("user", "relay", "both")


def db_to_linear(x_db):
    """Power ratio from decibels."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep of the sum SE.

    ``fading`` is either fixed large-scale gains (a scalar shared by all
    users or a length-K vector) or a :class:`CellGeometry`, in which case a
    single drop is drawn from ``seed``. Grid values for ``variable="snr"``
    are user powers in dB.
    """

    variable: str
    grid: tuple
    base: SystemParams
    fading: object = 1.0
    engines: str = "closed_form"
    n_trials: int = 10_000
    seed: int = 0
    form: str = "reference"
    workers: int = 1

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.variable!r}", "variable")
        if self.engines not in ENGINES:
            raise ConfigError(f"unknown engine selection {self.engines!r}", "engines")
        grid = np.asarray(self.grid, dtype=float)
        if len(grid) == 0:
            return
        if np.any(np.diff(grid) <= 0):
            raise ConfigError("sweep grid must be strictly increasing", "grid")
        if self.variable in ("M", "tau") and np.any(grid != np.round(grid)):
            raise ConfigError(f"{self.variable} grid must hold integers", "grid")
        if self.variable == "tau" and (grid[0] < self.base.K or grid[-1] > self.base.T):
            raise ConfigError("tau grid must lie within [K, T]", "tau")


@dataclass(frozen=True)
class CdfSpec:
    """Random user drops evaluated with the closed forms."""

    n_drops: int
    base: SystemParams
    geometry: CellGeometry = field(default_factory=CellGeometry)
    protocols: tuple = PROTOCOLS
    seed: int = 0
    form: str = "reference"
    workers: int = 1

    def __post_init__(self):
        if self.n_drops < 1:
            raise ConfigError("n_drops must be positive", "drops")
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise ConfigError(f"unknown protocol {p!r}", "protocols")


@dataclass
class ExperimentRecord:
    """Tabular result of one study."""

    name: str
    columns: tuple
    rows: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    undersampled: bool = False

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows], dtype=float)


def point_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for grid point ``index`` of a study."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def _map(func, items, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def resolve_beta(fading, K: int, seed: int = 0) -> np.ndarray:
    """Large-scale gains for K users from a fixed value or one random drop."""
    if isinstance(fading, CellGeometry):
        return draw_user_drop(fading, K, np.random.default_rng([int(seed), 0]))
    beta = np.broadcast_to(np.asarray(fading, dtype=float), (K,)).copy()
    if np.any(beta <= 0):
        raise ConfigError("large-scale gains must be positive", "beta")
    return beta


def _point_params(spec: SweepSpec, value) -> SystemParams:
    if spec.variable == "M":
        return spec.base.replace(M=int(value))
    if spec.variable == "tau":
        return spec.base.replace(tau=int(value))
    return spec.base.replace(P_u=float(db_to_linear(value)))


def sweep(spec: SweepSpec) -> ExperimentRecord:
    """Sum SE over a grid of M, tau or SNR with one or both engines.

    Columns are the grid variable, the closed-form sum SE, the Monte-Carlo
    sum SE and its 95% half-width; a column whose engine was not requested
    holds NaN.
    """
    beta = resolve_beta(spec.fading, spec.base.K, spec.seed)
    name = {"M": "M", "tau": "tau", "snr": "snr_db"}[spec.variable]
    record = ExperimentRecord(f"sweep-{spec.variable}",
                              (name, "se_sum_closed", "se_sum_mc", "mc_halfwidth"))
    record.derived["beta"] = beta.tolist()

    def evaluate(item):
        i, value = item
        params = _point_params(spec, value)
        profile = estimation_moments(beta, params.tau, params.P_p)
        closed = mc = hw = np.nan
        flag = False
        if spec.engines in ("closed_form", "both"):
            closed = analytics.se_sum(params, profile, spec.form)
        if spec.engines in ("monte_carlo", "both"):
            res = simulator.run_trials(params, profile, spec.n_trials,
                                       seed=point_seed(spec.seed, i), form=spec.form)
            mc, hw, flag = res.se_sum_hat, float(res.half_width["se_sum"]), res.undersampled
        return (value, closed, mc, hw), flag

    out = _map(evaluate, list(enumerate(spec.grid)), spec.workers)
    record.rows = [row for row, _ in out]
    record.undersampled = any(flag for _, flag in out)
    if spec.engines == "both":
        record.derived["disagreeing_points"] = [
            row[0] for row in record.rows
            if abs(row[1] - row[2]) > max(3 * row[3], 0.02 * row[1])]
    return record


def tau_grid(params: SystemParams, full_range: bool = False) -> np.ndarray:
    """Integer training lengths searched by :func:`optimal_tau`."""
    upper = params.T if full_range else max(params.K, params.T // 2)
    return np.arange(params.K, upper + 1)


def optimal_tau(base: SystemParams, fading=1.0, snr_list_db=DEFAULT_SNR_GRID_DB,
                full_range: bool = False, form: str = "reference",
                workers: int = 1) -> ExperimentRecord:
    """Training length maximising the closed-form sum SE at each SNR.

    Searches every integer tau in [K, T/2] (or [K, T] with ``full_range``);
    ties go to the smaller tau. ``derived["tau_opt"]`` lists the optimum per
    SNR in input order.
    """
    beta = resolve_beta(fading, base.K)
    taus = tau_grid(base, full_range)
    record = ExperimentRecord("sweep-tau", ("snr_db", "tau", "se_sum_closed", "optimal"))

    def evaluate(snr_db):
        P_u = float(db_to_linear(snr_db))
        curve = []
        for tau in taus:
            params = base.replace(tau=int(tau), P_u=P_u)
            curve.append(analytics.se_sum(params, estimation_moments(beta, params.tau,
                                                                     params.P_p), form))
        return np.array(curve)

    curves = _map(evaluate, list(snr_list_db), workers)
    best = []
    for snr_db, curve in zip(snr_list_db, curves):
        # argmax returns the first maximiser, i.e. the smallest tau
        j = int(np.argmax(curve))
        best.append(int(taus[j]))
        record.rows.extend((snr_db, int(tau), se, int(i == j))
                           for i, (tau, se) in enumerate(zip(taus, curve)))
    record.derived["tau_opt"] = best
    record.derived["snr_db"] = list(snr_list_db)
    return record


@dataclass
class CdfResult:
    """Sum SE per drop for each protocol, paired by drop."""

    samples: dict
    quantiles: dict
    record: ExperimentRecord

    def sorted(self, protocol: str) -> np.ndarray:
        return np.sort(self.samples[protocol])


def empirical_cdf(samples, x) -> np.ndarray:
    """Fraction of ``samples`` not exceeding each value of ``x``."""
    s = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(s, np.asarray(x, dtype=float), side="right") / len(s)


def cdf_over_drops(spec: CdfSpec, qs=(0.1, 0.5, 0.9)) -> CdfResult:
    """Closed-form sum SE of both protocols over random user drops.

    Every drop uses one gain vector for both protocols, so the samples are
    paired. Drop ``d`` draws from its own stream keyed by ``(seed, d)``.
    """
    params = spec.base

    def evaluate(d):
        beta = draw_user_drop(spec.geometry, params.K,
                              np.random.default_rng([int(spec.seed), int(d)]))
        profile = estimation_moments(beta, params.tau, params.P_p)
        out = []
        for p in spec.protocols:
            if p == "multi_way":
                out.append(analytics.se_sum(params, profile, spec.form))
            else:
                out.append(analytics.two_way_sum_se(params, profile, form=spec.form))
        return out

    values = np.array(_map(evaluate, list(range(spec.n_drops)), spec.workers))
    samples = {p: values[:, i] for i, p in enumerate(spec.protocols)}
    quantiles = {p: {float(q): float(np.quantile(samples[p], q)) for q in qs}
                 for p in spec.protocols}
    record = ExperimentRecord("cdf", ("drop",) + tuple(f"se_sum_{p}" for p in spec.protocols))
    record.rows = [(d,) + tuple(float(v) for v in values[d]) for d in range(spec.n_drops)]
    record.derived["quantiles"] = {p: {str(q): v for q, v in quantiles[p].items()}
                                   for p in spec.protocols}
    return CdfResult(samples, quantiles, record)


def compare_two_way(params: SystemParams, profile: FadingProfile, partners=None,
                    form: str = "reference") -> ExperimentRecord:
    """Per-user SE of multi-way and pairwise two-way relaying for one profile."""
    K = params.K
    partners = analytics.cyclic_partners(K) if partners is None else np.asarray(partners)
    multi = analytics.se_per_user(params, profile, form=form).se
    record = ExperimentRecord("compare-two-way", ("k", "se_multi_way", "se_two_way"))
    for k in range(K):
        record.rows.append((k, float(multi[k]),
                            analytics.two_way_se(params, profile, k, partners[k], form)))
    record.derived["se_sum_multi_way"] = float(np.sum(multi))
    record.derived["se_sum_two_way"] = float(sum(r[2] for r in record.rows))
    return record


def scaled_params(base: SystemParams, regime: str, M: int, E_u: float,
                  E_r: float) -> SystemParams:
    """System with user and/or relay power divided by M."""
    if regime == "user":
        return base.replace(M=int(M), P_u=E_u / M)
    if regime == "relay":
        return base.replace(M=int(M), P_r=E_r / M)
    if regime == "both":
        return base.replace(M=int(M), P_u=E_u / M, P_r=E_r / M)
    raise ConfigError(f"unknown scaling regime {regime!r}", "regime")


def power_scaling_study(base: SystemParams, fading=1.0, E_u: float = 10.0,
                        E_r: float = 10.0, M_grid=tuple(2 ** n for n in range(6, 13)),
                        form: str = "reference", workers: int = 1) -> ExperimentRecord:
    """Finite-M sum SE under 1/M power scaling against its large-M limit.

    The pilot power stays at ``base.P_p`` in every regime. Rows hold the
    regime, M, the finite-M sum SE, the limiting sum SE and the relative gap.
    """
    M_grid = [int(m) for m in M_grid]
    if any(b <= a for a, b in zip(M_grid, M_grid[1:])):
        raise ConfigError("M grid must be strictly increasing", "m_grid")
    beta = resolve_beta(fading, base.K)
    profile = estimation_moments(beta, base.tau, base.P_p)
    lim = analytics.asymptotic_limits(base, profile, E_u, E_r)
    limit = {"user": float(np.sum(lim.se_user_scaled)),
             "relay": float(np.sum(lim.se_relay_scaled)),
             "both": float(np.sum(lim.se_both_scaled))}
    items = [(r, M) for r in REGIMES for M in M_grid]

    def evaluate(item):
        regime, M = item
        finite = analytics.se_sum(scaled_params(base, regime, M, E_u, E_r), profile, form)
        return (regime, M, finite, limit[regime], abs(finite - limit[regime]) / limit[regime])

    record = ExperimentRecord("scaling", ("regime", "M", "se_sum_finite", "se_sum_limit",
                                          "rel_gap"))
    record.rows = _map(evaluate, items, workers)
    record.derived["xi"] = lim.xi
    return record
