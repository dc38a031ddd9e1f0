import numpy as np
import pytest

from critical_hawkes.ensemble import hawkes_ensemble, resolve_threads
from critical_hawkes.params import ModelConfig, SelfExciting


@pytest.mark.parametrize("agents", [None, SelfExciting(2.0, 0.5, 1.0)])
def test_thread_count_does_not_change_results(agents):
    cfg = ModelConfig(n_agents=50, grid_points=64, **({"agents": agents} if agents else {}))
    a = hawkes_ensemble(cfg, 12, 20.0, seed=3, threads=1)
    b = hawkes_ensemble(cfg, 12, 20.0, seed=3, threads=4)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.pi, b.pi)
    np.testing.assert_array_equal(a.n_events, b.n_events)


def test_prefix_stability():
    cfg = ModelConfig(n_agents=30, grid_points=32)
    small = hawkes_ensemble(cfg, 5, 20.0, seed=8)
    large = hawkes_ensemble(cfg, 9, 20.0, seed=8)
    np.testing.assert_array_equal(small.z, large.z[:5])


def test_hit_index_and_mask():
    cfg = ModelConfig(n_agents=30, grid_points=32)
    ens = hawkes_ensemble(cfg, 6, 0.0, seed=1)
    assert np.all(ens.hit_index == 0)
    assert ens.before_tau().sum() == 6
    assert ens.path(0).tau_h_hit == 0.0
    never = hawkes_ensemble(cfg, 6, np.inf, seed=1)
    assert never.hit_fraction() == 0.0
    assert never.before_tau().all()


def test_resolve_threads():
    assert resolve_threads(3) == 3
    assert resolve_threads("auto") >= 1
    with pytest.raises(ValueError):
        resolve_threads(0)
