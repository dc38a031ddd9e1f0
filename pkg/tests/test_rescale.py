import math

import numpy as np
import pytest

from critical_hawkes.engine import simulate_path
from critical_hawkes.ensemble import hawkes_ensemble
from critical_hawkes.params import (
    ExternalSignal,
    Homogeneous,
    Inhomogeneous,
    ModelConfig,
    SelfExciting,
    limit_params,
)
from critical_hawkes.rescale import (
    default_truncation_level,
    observable_weights,
    to_macro,
    truncate_diag,
    z_bound_constant,
)
from critical_hawkes.seeding import derive_seed

CONFIGS = [
    ModelConfig(n_agents=200),
    ModelConfig(n_agents=200, agents=Homogeneous(1.0, 0.2)),
    ModelConfig(n_agents=200, agents=Homogeneous(5.0, 0.9), signal=ExternalSignal(2.0, 0.5, 1.0, 3.0)),
    ModelConfig(n_agents=200, agents=SelfExciting(2.0, 0.5, 1.0)),
    ModelConfig(n_agents=200, agents=Inhomogeneous(((2.0, 0.5, 0.5), (3.0, 0.2, 0.5)))),
]


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: c.variant)
def test_initial_value_of_y(cfg):
    macro = to_macro(simulate_path(cfg, 1))
    assert macro.y[0] == pytest.approx(limit_params(cfg).y0, rel=1e-14)
    assert macro.pi[0] == 0.0


def test_zero_path():
    cfg = ModelConfig(n_agents=50, signal=ExternalSignal(0.0, 0.0, 0.0, 0.0))
    macro = to_macro(simulate_path(cfg, 1))
    assert not macro.pi.any() and not macro.y.any() and not macro.z.any()


def test_gamma_one_kills_z():
    macro = to_macro(simulate_path(ModelConfig(n_agents=100, agents=Homogeneous(3.0, 1.0)), 2))
    assert np.all(macro.z == 0.0)


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: c.variant)
def test_pathwise_bounds_and_inverse_map(cfg):
    w = observable_weights(cfg)
    for r in range(5):
        rec = simulate_path(cfg, derive_seed(3, r))
        macro = to_macro(rec)
        assert np.all(macro.y >= 0.0)
        assert np.all(np.abs(macro.z) <= w.z_bound * macro.y * (1 + 1e-12) + 1e-15)
        scaled = np.linalg.solve(w.matrix, np.vstack([macro.y, macro.z]))
        root = math.sqrt(cfg.n_agents)
        np.testing.assert_allclose(scaled[0], root * rec.m_plus_path, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(scaled[1], root * rec.m_minus_path, rtol=1e-10, atol=1e-12)
        steps = macro.pi * root
        np.testing.assert_allclose(steps, np.round(steps), atol=1e-9)


@pytest.mark.parametrize("beta, gamma", [(1.0, 0.5), (2.0, 0.5), (5.0, 0.1), (1.0, 0.0)])
def test_z_bound_closed_form(beta, gamma):
    if gamma == 0.0:
        w = 1.0 / (1.0 + beta)
        expected = 0.5 / min(w, beta * w)
    else:
        expected = observable_weights(ModelConfig(agents=Homogeneous(beta, gamma))).z_bound
    assert z_bound_constant(beta, gamma) == pytest.approx(expected)


def test_truncation_markers():
    macro = to_macro(simulate_path(ModelConfig(n_agents=100), 4))
    assert truncate_diag(macro, math.inf).tau_h_hit is None
    assert truncate_diag(macro, math.inf).stop_index() == macro.grid.size
    hit0 = truncate_diag(macro, 0.0)
    assert hit0.tau_h_hit == 0.0 and hit0.stop_index() == 1
    np.testing.assert_array_equal(hit0.y, macro.y)
    with pytest.raises(ValueError):
        truncate_diag(macro, -1.0)


def test_default_truncation_rarely_hit():
    cfg = ModelConfig(n_agents=1000)
    h = default_truncation_level(limit_params(cfg).y0)
    assert h == 20.0
    ens = hawkes_ensemble(cfg, 400, h, seed=1)
    assert ens.hit_fraction() < 0.05
