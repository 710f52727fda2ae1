import numpy as np
import pytest

from mwrelay import analytics, experiments
from mwrelay.channel import CellGeometry, ConfigError, SystemParams, estimation_moments
from mwrelay.experiments import CdfSpec, SweepSpec


def sweep_base(K, M=8):
    return SystemParams(M, K, 200, K, 1.0, 1.0, 10.0)


def tau_base():
    return SystemParams(200, 10, 200, 10, 10.0, 1.0, 10.0)


def test_sweep_spec_validation():
    base = sweep_base(5)
    with pytest.raises(ConfigError):
        SweepSpec("P", (1, 2), base)
    with pytest.raises(ConfigError):
        SweepSpec("M", (8, 8), base)
    with pytest.raises(ConfigError):
        SweepSpec("tau", (4, 10), base)
    with pytest.raises(ConfigError):
        SweepSpec("M", (8, 16), base, engines="fast")
    SweepSpec("M", (), base)


def test_empty_grid_gives_empty_record():
    rec = experiments.sweep(SweepSpec("M", (), sweep_base(5)))
    assert rec.rows == [] and rec.columns[0] == "M"


@pytest.mark.parametrize("K", [5, 10, 20])
def test_sweep_monotone(K):
    grid = (8, 20, 50, 100, 200, 500)
    rec = experiments.sweep(SweepSpec("M", grid, sweep_base(K)))
    se = rec.column("se_sum_closed")
    assert np.all(np.diff(se) > 0)
    assert np.all(np.isnan(rec.column("se_sum_mc")))


def test_sweep_gaps_grow():
    def at(K, M):
        return analytics.se_sum(sweep_base(K, M), estimation_moments(np.ones(K), K, 1.0))
    small = np.ptp([at(K, 20) for K in (5, 10, 20)])
    large = np.ptp([at(K, 500) for K in (5, 10, 20)])
    assert small < 0.25 * large


def test_sweep_both_engines_small_point():
    base = SystemParams(1, 2, 200, 2, 1.0, 1.0, 10.0)
    rec = experiments.sweep(SweepSpec("M", (1, 2), base, engines="both", n_trials=50_000,
                                      form="exact"))
    for _, closed, mc, hw in rec.rows:
        assert abs(closed - mc) <= max(3 * hw / 2.045, 0.02 * closed)
    assert rec.derived["disagreeing_points"] == []


def test_sweep_parallel_order_and_determinism():
    spec = dict(variable="M", grid=(4, 8, 16), base=sweep_base(3), engines="monte_carlo",
                n_trials=2000, seed=3)
    a = experiments.sweep(SweepSpec(**spec, workers=1))
    b = experiments.sweep(SweepSpec(**spec, workers=3))
    assert a.rows == b.rows


def test_snr_and_tau_sweeps():
    base = sweep_base(5, 64)
    snr = experiments.sweep(SweepSpec("snr", (-10.0, 0.0, 10.0), base))
    assert np.all(np.diff(snr.column("se_sum_closed")) > 0)
    p0 = base.replace(P_u=1.0)
    assert snr.rows[1][1] == analytics.se_sum(p0, estimation_moments(np.ones(5), 5, 1.0))
    tau = experiments.sweep(SweepSpec("tau", (5, 10, 50), base))
    assert tau.column("tau").tolist() == [5, 10, 50]


def test_geometry_fading_draws_one_drop():
    spec = SweepSpec("M", (8, 16), sweep_base(4), fading=CellGeometry(), seed=2)
    a, b = experiments.sweep(spec), experiments.sweep(spec)
    assert a.rows == b.rows and len(a.derived["beta"]) == 4


def test_optimal_tau_ordering():
    rec = experiments.optimal_tau(tau_base(), 1.0, (-10.0, 0.0, 10.0))
    opt = rec.derived["tau_opt"]
    assert opt[0] >= opt[1] >= opt[2]
    for snr, best in zip((-10.0, 0.0, 10.0), opt):
        rows = [r for r in rec.rows if r[0] == snr]
        se = {r[1]: r[2] for r in rows}
        assert se[best] >= se[10] and se[best] >= max(se.values()) - 1e-15
        assert sum(r[3] for r in rows) == 1


def test_optimal_tau_high_snr_is_k():
    rec = experiments.optimal_tau(tau_base(), 1.0, (60.0,))
    assert rec.derived["tau_opt"] == [10]


def test_optimal_tau_interior_when_pilots_weak():
    base = SystemParams(200, 10, 200, 10, 0.1, 1.0, 10.0)
    opt = experiments.optimal_tau(base, 1.0, (-10.0, 0.0))
    assert all(10 < t < 100 for t in opt.derived["tau_opt"])


def test_optimal_tau_ties_go_low():
    base = SystemParams(8, 2, 20, 2, 1.0, 1.0, 1.0)
    rec = experiments.optimal_tau(base, 1.0, (0.0,), full_range=True)
    assert max(r[1] for r in rec.rows) == 20
    # tau = T has zero SE; a curve of zeros would pick tau = K
    assert rec.derived["tau_opt"][0] == int(rec.rows[np.argmax([r[2] for r in rec.rows])][1])


def test_optimal_tau_grid_refinement_invariant():
    base = tau_base()
    full = experiments.optimal_tau(base, 1.0, (-10.0,), full_range=True)
    half = experiments.optimal_tau(base, 1.0, (-10.0,))
    assert full.derived["tau_opt"] == half.derived["tau_opt"]


def test_cdf_protocols():
    res = experiments.cdf_over_drops(CdfSpec(500, SystemParams(200, 20, 200, 20, 1, 1, 1)))
    q = res.quantiles
    assert q["multi_way"][0.5] > q["two_way"][0.5]
    assert q["multi_way"][0.9] > q["two_way"][0.9]
    x = np.linspace(0, 20, 200)
    F = experiments.empirical_cdf(res.samples["multi_way"], x)
    assert np.all(np.diff(F) >= 0) and F[0] >= 0 and F[-1] == 1.0


def test_cdf_two_users_coincide():
    res = experiments.cdf_over_drops(CdfSpec(200, SystemParams(50, 2, 200, 2, 1, 1, 1)))
    assert np.array_equal(res.samples["multi_way"], res.samples["two_way"])


def test_cdf_deterministic_geometry_is_a_step():
    geom = CellGeometry(D_d=1e-9, d_0=200.0, nu=4.0, sigma_z_dB=0.0)
    res = experiments.cdf_over_drops(CdfSpec(100, SystemParams(32, 4, 200, 4, 1, 1, 1),
                                             geometry=geom))
    assert np.ptp(res.samples["multi_way"]) < 1e-12


def test_cdf_seed_stability():
    base = SystemParams(64, 10, 200, 10, 1, 1, 1)
    a = experiments.cdf_over_drops(CdfSpec(500, base, seed=1))
    b = experiments.cdf_over_drops(CdfSpec(500, base, seed=2))
    from scipy.stats import ks_2samp
    assert ks_2samp(a.samples["multi_way"], b.samples["multi_way"]).statistic <= 0.08


def test_cdf_parallel_matches_serial():
    base = SystemParams(16, 5, 200, 5, 1, 1, 1)
    a = experiments.cdf_over_drops(CdfSpec(50, base, seed=4))
    b = experiments.cdf_over_drops(CdfSpec(50, base, seed=4, workers=4))
    assert a.record.rows == b.record.rows


def test_compare_two_way():
    params = SystemParams(100, 6, 200, 6, 1, 1, 1)
    profile = estimation_moments(np.ones(6), 6, 1.0)
    rec = experiments.compare_two_way(params, profile)
    assert rec.derived["se_sum_multi_way"] > rec.derived["se_sum_two_way"]
    assert len(rec.rows) == 6


def test_power_scaling_study():
    base = SystemParams(10, 10, 200, 10, 1.0, 1.0, 10.0)
    rec = experiments.power_scaling_study(base, 1.0, 10.0, 10.0)
    by = {r: [row for row in rec.rows if row[0] == r] for r in experiments.REGIMES}
    for regime, rows in by.items():
        finite = [row[2] for row in rows]
        assert np.all(np.diff(finite) > 0), regime
        assert rows[-1][1] == 4096 and rows[-1][4] < 0.05, regime
    profile = estimation_moments(np.ones(10), 10, 1.0)
    lim = analytics.asymptotic_limits(base, profile, 10.0, 10.0)
    assert by["user"][0][3] == pytest.approx(np.sum(lim.se_user_scaled), rel=1e-15)
    with pytest.raises(ConfigError):
        experiments.power_scaling_study(base, 1.0, M_grid=(64, 32))


def test_db_to_linear():
    assert experiments.db_to_linear(0.0) == 1.0
    assert experiments.db_to_linear(10.0) == pytest.approx(10.0)
