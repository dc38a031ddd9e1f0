import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from critical_hawkes import analysis
from critical_hawkes.engine import simulate_path
from critical_hawkes.ensemble import MacroEnsemble, from_sde, hawkes_ensemble
from critical_hawkes.errors import IllConditioned, InsufficientReplicas
from critical_hawkes.params import (
    ExternalSignal,
    Homogeneous,
    Inhomogeneous,
    IntensityFn,
    IntensityKind,
    ModelConfig,
    SelfExciting,
    limit_params,
)
from critical_hawkes.sde import SdeScheme, simulate_sde_ensemble
from critical_hawkes.seeding import derive_seed

DESK = limit_params(ModelConfig())


def sde_ensemble(params, seed, replicas, n_steps=2**12, grid_points=512, horizon=1.0):
    return from_sde(simulate_sde_ensemble(params, SdeScheme.for_horizon(horizon, n_steps=n_steps), seed, replicas, grid_points))


@pytest.fixture(scope="module")
def desk_sde():
    return sde_ensemble(DESK, 1, 2000)


@pytest.fixture(scope="module")
def small_hawkes():
    return hawkes_ensemble(ModelConfig(n_agents=100), 300, 20.0, seed=2)


def test_nearest_rank_quantiles():
    x = np.arange(1.0, 11.0)
    np.testing.assert_array_equal(analysis.nearest_rank_quantiles(x), [1.0, 3.0, 5.0, 8.0, 10.0])
    assert analysis.nearest_rank_quantiles(np.array([4.0]), (0.0, 1.0)).tolist() == [4.0, 4.0]


def test_ensemble_stats(small_hawkes):
    s = analysis.ensemble_stats(small_hawkes)
    r = small_hawkes.replicas
    assert s.replicas == r
    np.testing.assert_allclose(s.y.se, small_hawkes.y.std(axis=0, ddof=1) / math.sqrt(r))
    assert np.all(s.y.quantiles[0] <= s.y.quantiles[-1])
    assert np.nanmax(np.abs(s.increment_corr)) <= 1.0
    assert s.sup_abs_z.shape == (r,)
    again = analysis.ensemble_stats(small_hawkes)
    np.testing.assert_array_equal(s.y.var, again.y.var)
    rows = list(s.rows())
    assert rows[0][:2] == (0.0, "pi_mean")


def test_collapse_zero_for_gamma_one():
    ens = [hawkes_ensemble(ModelConfig(n_agents=n, agents=Homogeneous(2.0, 1.0), grid_points=64), 100, 20.0, seed=1) for n in (10, 20, 40)]
    table = analysis.collapse_diagnostic(ens)
    assert all(r.sup_z2 == 0.0 and r.z4_scaled == 0.0 for r in table.rows)


def test_collapse_preconditions(small_hawkes):
    with pytest.raises(ValueError):
        analysis.collapse_diagnostic([small_hawkes, small_hawkes])
    few = hawkes_ensemble(ModelConfig(n_agents=10, grid_points=16), 50, 20.0)
    with pytest.raises(InsufficientReplicas):
        analysis.collapse_diagnostic([few, few, few])


def test_ks_critical_value():
    assert analysis.ks_critical_value(2000, 2000) == pytest.approx(1.3581 * math.sqrt(2 / 2000), rel=1e-4)


def test_same_law_sanity(desk_sde):
    other = sde_ensemble(DESK, 99, 2000)
    crit = analysis.ks_critical_value(2000, 2000, 0.01)
    for t in (0.25, 0.5, 1.0):
        res = analysis.convergence_metric(desk_sde, other, t)
        assert 0.0 <= res.ks_pi < crit and 0.0 <= res.ks_y < crit


def test_convergence_preconditions(desk_sde, small_hawkes):
    with pytest.raises(InsufficientReplicas):
        analysis.convergence_metric(small_hawkes, desk_sde, 0.5)
    with pytest.raises(ValueError):
        analysis.convergence_metric(desk_sde, desk_sde, 0.0)


def test_symmetric_price_distribution():
    ens = hawkes_ensemble(ModelConfig(n_agents=100, agents=Homogeneous(1.0, 1.0)), 1000, 20.0, seed=3)
    x = ens.pi[:, ens.index_of(0.5)]
    assert abs(stats.skew(x)) < 4 * math.sqrt(6.0 / x.size)


def test_drift_self_consistency(desk_sde):
    fit = analysis.drift_regression(desk_sde)
    for i, target in enumerate((DESK.beta_y, DESK.theta_y, DESK.quadratic_drift)):
        assert fit.within(i, target), (i, fit.coef, fit.se)
    assert fit.bin_dt == pytest.approx(1.0 / 128)


def test_drift_recovers_linear_term():
    p = DESK.with_(theta_y=1.5)
    fit = analysis.drift_regression(sde_ensemble(p, 5, 2000))
    assert fit.within(1, 1.5)
    assert fit.within(2, p.quadratic_drift)


def test_drift_ill_conditioned():
    grid = np.linspace(0.0, 1.0, 129)
    y = np.ones((10, 129))
    ens = MacroEnsemble(grid, y, y, y, np.full(10, 129), math.inf)
    with pytest.raises(IllConditioned):
        analysis.drift_regression(ens)


def test_leverage_zero_for_beta_one():
    lp = limit_params(ModelConfig(agents=Homogeneous(1.0, 0.5)))
    est = analysis.leverage_estimate(sde_ensemble(lp, 3, 1000))
    assert est.within(0.0)
    assert -1.0 <= est.pooled <= 1.0


def test_leverage_large_beta():
    # y sits at the attainable boundary most of the time here, so increments
    # are taken per grid step and only where y is away from 0
    lp = limit_params(ModelConfig(agents=Homogeneous(50.0, 1.0)))
    ens = sde_ensemble(lp, 4, 1000, n_steps=2**14, grid_points=2048)
    est = analysis.leverage_estimate(ens, bin_dt=1.0 / 2048, y_floor=0.5)
    assert est.pooled < -0.6
    assert est.pooled > -1.0 / math.sqrt(2.0)


def test_leverage_desk_sde(desk_sde):
    assert analysis.leverage_estimate(desk_sde).within(DESK.rho)


def test_moment_scaling_brownian():
    rng = np.random.default_rng(0)
    grid = np.linspace(0.0, 1.0, 2**14 + 1)
    w = np.concatenate([np.zeros((200, 1)), np.cumsum(rng.standard_normal((200, 2**14)) * math.sqrt(grid[1]), axis=1)], axis=1)
    ms = analysis.moment_scaling(w, grid, [0.0, 1.0, 2.0], [1, 4, 16, 64, 256])
    assert ms.exponents[0] == 0.0
    np.testing.assert_allclose(ms.exponents[1:], [0.5, 1.0], atol=0.05)


def test_moment_scaling_limit_price(desk_sde):
    ms = analysis.moment_scaling(desk_sde.pi, desk_sde.grid, [2.0], [1, 2, 4, 8, 16, 32, 64])
    assert ms.exponents[0] == pytest.approx(1.0, abs=0.1)


def test_moment_scaling_lag_span():
    with pytest.raises(ValueError):
        analysis.moment_scaling(np.zeros((2, 100)), np.linspace(0, 1, 100), [1.0], [1, 10])


def test_oracle_zero_intensity():
    cfg = ModelConfig(n_agents=2, signal=ExternalSignal(0.0, 0.0, 0.0, 0.0))
    out = analysis.oracle_simulate(cfg, 1e-3, 1, 100)
    assert not out.counts.any() and np.all(np.isinf(out.first_times))


def test_oracle_poisson_benchmark():
    # linear intensity with memories pinned at their fixed point
    n, a = 2, 1.0
    f = IntensityFn(IntensityKind.LINEAR_REFERENCE, p=1.0)
    alpha = 2.0
    b = a * alpha * math.sqrt(n)
    cfg = ModelConfig(n_agents=n, intensity=f, signal=ExternalSignal(a, a, b, b), alpha_override=alpha)
    out = analysis.oracle_simulate(cfg, 1e-3, 2, 2000, frozen=True)
    m = a / math.sqrt(n)
    lam = f(m * 2.0) + f(m * 2.0)
    expected = lam * cfg.micro_horizon * n
    assert abs(out.counts.mean() - expected) < 4 * math.sqrt(expected / out.counts.size)


def test_oracle_size_limit():
    with pytest.raises(ValueError):
        analysis.oracle_simulate(ModelConfig(n_agents=5), 1e-3, 0, 10)


@pytest.mark.parametrize(
    "agents",
    [Homogeneous(), SelfExciting(2.0, 0.5, 1.0), Inhomogeneous(((2.0, 0.5, 0.5), (3.0, 0.2, 0.5)))],
    ids=lambda a: type(a).__name__,
)
def test_oracle_agrees_with_engine(agents):
    cfg = ModelConfig(n_agents=2, agents=agents, horizon=math.sqrt(2.0), grid_points=4)
    out = analysis.oracle_simulate(cfg, 1e-3, 7, 2000)
    recs = [simulate_path(cfg, derive_seed(8, r), record_events=True) for r in range(2000)]
    counts = [r.n_events for r in recs]
    first = [min(r.events.first_time(), cfg.micro_horizon) for r in recs]
    assert stats.ks_2samp(counts, out.counts).pvalue > 0.01
    assert stats.ks_2samp(first, np.minimum(out.first_times, cfg.micro_horizon)).pvalue > 0.01


@pytest.mark.parametrize(
    "agents",
    [Homogeneous(), SelfExciting(2.0, 0.5, 1.0), Inhomogeneous(((2.0, 0.5, 0.5), (3.0, 0.2, 0.5)))],
    ids=lambda a: type(a).__name__,
)
def test_compensator_residual_centered(agents):
    cfg = ModelConfig(n_agents=10, agents=agents, grid_points=32)
    recs = [simulate_path(cfg, derive_seed(5, r), record_events=True) for r in range(400)]
    res = analysis.compensator_residual(recs)
    assert res.passed()
    assert np.all(res.residual[:, 0] == 0.0)


def test_compensator_detects_wrong_intensity():
    cfg = ModelConfig(n_agents=10, grid_points=32)
    wrong = cfg.with_(intensity=IntensityFn(p=1.3), alpha_override=cfg.alpha)
    recs = [
        dataclasses.replace(simulate_path(cfg, derive_seed(5, r), record_events=True), config=wrong)
        for r in range(400)
    ]
    assert not analysis.compensator_residual(recs).passed()


def test_compensator_needs_events():
    rec = simulate_path(ModelConfig(n_agents=10), 1)
    with pytest.raises(ValueError):
        analysis.compensator_residual([rec])
