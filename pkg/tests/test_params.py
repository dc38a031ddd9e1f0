import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critical_hawkes.errors import ConfigError, NonCriticalAlpha, UnsupportedIntensity
from critical_hawkes.params import (
    ExternalSignal,
    Homogeneous,
    Inhomogeneous,
    IntensityFn,
    IntensityKind,
    ModelConfig,
    SelfExciting,
    agent_groups,
    critical_alpha,
    eval_intensity,
    largest_remainder_counts,
    limit_params,
)

betas = st.floats(1.0, 50.0)
gammas = st.floats(0.01, 1.0)


def test_default_critical_alpha(desk):
    assert desk.alpha == 2.0
    assert desk.is_critical


def test_saturating_intensity_shape():
    f = IntensityFn(p=2.0, s=0.5)
    assert f.slope0 == 2.0
    assert f.curvature0 == -4.0
    assert f.supremum == 1.0
    assert f(0.0) == 0.0
    assert f(-3.0) == 0.0
    x = np.linspace(0, 10, 101)
    assert np.all(np.diff(f(x)) > 0)
    assert np.all(f(x) < f.supremum)


def test_linear_reference_is_out_of_scope():
    f = IntensityFn(IntensityKind.LINEAR_REFERENCE, p=1.5)
    assert f(2.0) == 3.0
    assert not f.in_limit_scope
    with pytest.raises(UnsupportedIntensity):
        limit_params(ModelConfig(intensity=f, alpha_override=critical_alpha(f, Homogeneous())))


def test_eval_intensity_scalar_and_array():
    f = IntensityFn()
    assert isinstance(eval_intensity(f, 1.0), float)
    np.testing.assert_allclose(eval_intensity(f, np.array([1.0, 2.0])), 1 - np.exp(-np.array([1.0, 2.0])))


@pytest.mark.parametrize("p, s", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (math.inf, 1.0)])
def test_intensity_validation(p, s):
    with pytest.raises(ConfigError):
        IntensityFn(p=p, s=s)


@pytest.mark.parametrize("beta, gamma", [(0.5, 0.5), (2.0, 1.5), (2.0, -0.1)])
def test_agent_validation(beta, gamma):
    with pytest.raises(ConfigError):
        Homogeneous(beta, gamma)


def test_external_signal_scaling():
    sig = ExternalSignal(1.0, 2.0, 3.0, 4.0)
    assert sig.micro(100) == (0.1, 0.2, 0.03, 0.04)
    assert ExternalSignal(b_plus=3.0, b_scaling="sqrt_n").micro(100)[2] == pytest.approx(0.3)
    with pytest.raises(ConfigError):
        ExternalSignal(b_scaling="bogus")
    with pytest.raises(ConfigError):
        ExternalSignal(a_plus=-1.0)


def test_default_limit_params(desk):
    lp = limit_params(desk)
    assert lp.y0 == pytest.approx(2.0)
    assert lp.beta_y == pytest.approx(2.0)
    assert lp.quadratic_drift == pytest.approx(-1.0)
    assert lp.theta_y == 0.0
    assert lp.pi0 == 0.0 and lp.beta_pi == 0.0
    assert lp.rho == pytest.approx(-1.0 / math.sqrt(10.0))


def test_unit_parameters_example():
    lp = limit_params(ModelConfig(agents=Homogeneous(1.0, 1.0)))
    assert lp.rho == 0.0
    assert lp.alpha_y == 1.0


def test_beta3_gamma1_leverage():
    assert limit_params(ModelConfig(agents=Homogeneous(3.0, 1.0))).rho == pytest.approx(-0.4472, abs=5e-5)


def test_gamma_zero_rejected():
    with pytest.raises(ConfigError):
        limit_params(ModelConfig(agents=Homogeneous(2.0, 0.0)))


def test_subcritical_rejected_for_limit():
    cfg = ModelConfig(alpha_override=3.0)
    assert not cfg.is_critical
    with pytest.raises(NonCriticalAlpha):
        limit_params(cfg)


def test_self_exciting_theta():
    lp = limit_params(ModelConfig(agents=SelfExciting(2.0, 0.5, 1.0)))
    assert lp.theta_y == pytest.approx(2.0)


def test_largest_remainder_counts():
    assert largest_remainder_counts([0.5, 0.5], 3) in ([2, 1], [1, 2])
    assert sum(largest_remainder_counts([0.2, 0.3, 0.5], 7)) == 7
    assert largest_remainder_counts([1 / 3, 1 / 3, 1 / 3], 10) == [4, 3, 3]


def test_agent_groups_cover_population():
    law = Inhomogeneous(((2.0, 0.5, 0.25), (3.0, 0.2, 0.75)))
    groups = agent_groups(law, 10)
    assert sum(g.count for g in groups) == 10
    assert [g.offset for g in groups] == [0, groups[0].count]


def test_inhomogeneous_weights_validated():
    with pytest.raises(ConfigError):
        Inhomogeneous(((2.0, 0.5, 0.4),))


@settings(max_examples=200, deadline=None)
@given(betas, gammas)
def test_leverage_nonpositive_and_bounded(beta, gamma):
    rho = limit_params(ModelConfig(agents=Homogeneous(beta, gamma))).rho
    assert rho <= 0.0
    assert rho > -1.0 / math.sqrt(2.0)


@settings(max_examples=200, deadline=None)
@given(betas, gammas)
def test_single_atom_matches_homogeneous(beta, gamma):
    base = ModelConfig(agents=Homogeneous(beta, gamma))
    hom = limit_params(base)
    inh = limit_params(base.with_(agents=Inhomogeneous(((beta, gamma, 1.0),))))
    for k in ("beta_pi", "sigma_pi", "beta_y", "alpha_y", "sigma_y", "rho", "y0", "pi0"):
        assert getattr(inh, k) == pytest.approx(getattr(hom, k), rel=1e-13, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(betas, gammas, st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_coefficients_positive(beta, gamma, p, s):
    lp = limit_params(ModelConfig(intensity=IntensityFn(p=p, s=s), agents=Homogeneous(beta, gamma)).with_())
    assert lp.sigma_pi > 0 and lp.sigma_y > 0 and lp.alpha_y > 0
    assert lp.f_second0 < 0


def test_critical_alpha_uses_finite_population_average():
    law = Inhomogeneous(((2.0, 0.5, 0.5), (1.0, 0.0, 0.5)))
    # three agents: two of the first atom, one of the second
    assert critical_alpha(IntensityFn(), law, 3) == pytest.approx(1.0 + 2.0 / 3.0)


def test_model_config_grid(desk):
    g = desk.grid()
    assert g.shape == (513,)
    assert g[-1] == desk.horizon
    np.testing.assert_allclose(desk.micro_grid(), math.sqrt(desk.n_agents) * g)
