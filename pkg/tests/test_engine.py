import math

import numpy as np
import pytest
from scipy import stats

from critical_hawkes.engine import (
    EventLog,
    Sign,
    available_backends,
    flow,
    initial_state,
    rejection_bound,
    simulate_path,
    step_thinning,
    variant_intensities,
)
from critical_hawkes.errors import EventBudgetExceeded
from critical_hawkes.params import (
    ExternalSignal,
    Homogeneous,
    Inhomogeneous,
    ModelConfig,
    SelfExciting,
)
from critical_hawkes.seeding import derive_seed, splitmix64

VARIANTS = [
    Homogeneous(2.0, 0.5),
    SelfExciting(2.0, 0.5, 1.0),
    Inhomogeneous(((2.0, 0.5, 0.3), (4.0, 0.1, 0.7))),
]
needs_compiled = pytest.mark.skipif("compiled" not in available_backends(), reason="compiled kernel not built")


def _same(a, b):
    assert a.n_events == b.n_events
    assert a.n_candidates == b.n_candidates
    np.testing.assert_array_equal(a.m_plus_path, b.m_plus_path)
    np.testing.assert_array_equal(a.m_minus_path, b.m_minus_path)
    np.testing.assert_array_equal(a.count_plus_path, b.count_plus_path)
    assert a.events.to_bytes() == b.events.to_bytes()


@needs_compiled
@pytest.mark.parametrize("agents", VARIANTS, ids=lambda a: type(a).__name__)
@pytest.mark.parametrize("n", [1, 7, 100])
def test_backends_bit_identical(agents, n):
    cfg = ModelConfig(n_agents=n, agents=agents, grid_points=64)
    for r in range(3):
        s = derive_seed(11, r)
        _same(
            simulate_path(cfg, s, record_events=True, backend="compiled"),
            simulate_path(cfg, s, record_events=True, backend="python"),
        )


@pytest.mark.parametrize("agents", VARIANTS, ids=lambda a: type(a).__name__)
def test_determinism(agents):
    cfg = ModelConfig(n_agents=50, agents=agents)
    _same(simulate_path(cfg, 5, record_events=True), simulate_path(cfg, 5, record_events=True))


def test_different_seeds_differ():
    cfg = ModelConfig(n_agents=50)
    assert simulate_path(cfg, 1).n_events != simulate_path(cfg, 2).n_events or not np.array_equal(
        simulate_path(cfg, 1).m_plus_path, simulate_path(cfg, 2).m_plus_path
    )


@pytest.mark.parametrize("agents", VARIANTS, ids=lambda a: type(a).__name__)
def test_path_consistency(agents):
    cfg = ModelConfig(n_agents=30, agents=agents, grid_points=32)
    rec = simulate_path(cfg, 3, record_events=True)
    assert rec.grid[0] == 0.0 and rec.grid[-1] == cfg.horizon
    a_p, a_m, _, _ = cfg.signal.micro(cfg.n_agents)
    assert rec.m_plus_path[0] == a_p and rec.m_minus_path[0] == a_m
    ev = rec.events
    assert len(ev) == rec.n_events == rec.count_sum_path[-1]
    assert np.all(np.diff(ev.t) > 0)
    assert np.all(ev.agent < cfg.n_agents)
    micro = cfg.micro_grid()
    for j in (5, 17, 32):
        before = ev.t < micro[j]
        assert rec.count_plus_path[j] == np.sum(before & (ev.sign == Sign.BUY))
        assert rec.count_minus_path[j] == np.sum(before & (ev.sign == Sign.SELL))
    assert np.all(np.diff(rec.count_plus_path) >= 0)


def test_memory_replay_matches_grid():
    cfg = ModelConfig(n_agents=20, grid_points=16)
    rec = simulate_path(cfg, 9, record_events=True)
    a_p, _, b_p, _ = cfg.signal.micro(cfg.n_agents)
    q = b_p / cfg.alpha
    ev = rec.events
    buys = ev.t[ev.sign == Sign.BUY]
    for j, t in enumerate(cfg.micro_grid()):
        m = q + (a_p - q) * math.exp(-cfg.alpha * t) + np.sum(np.exp(-cfg.alpha * (t - buys[buys < t]))) / cfg.n_agents
        assert rec.m_plus_path[j] == pytest.approx(m, rel=1e-11, abs=1e-14)


def test_self_exciting_agent_memories():
    cfg = ModelConfig(n_agents=5, agents=SelfExciting(2.0, 0.5, 1.0), grid_points=8)
    rec = simulate_path(cfg, 4, record_events=True)
    a_p, _, b_p, _ = cfg.signal.micro(cfg.n_agents)
    q = b_p / cfg.alpha
    t_end = cfg.micro_horizon
    ev = rec.events
    for i in range(cfg.n_agents):
        own = ev.t[(ev.agent == i) & (ev.sign == Sign.BUY)]
        x = q + (a_p - q) * math.exp(-cfg.alpha * t_end) + np.sum(np.exp(-cfg.alpha * (t_end - own)))
        assert rec.agent_x_plus[i] == pytest.approx(x, rel=1e-11)
    assert rec.m_plus_path[-1] == pytest.approx(rec.agent_x_plus.mean(), rel=1e-11)


def test_zero_signal_gives_no_events():
    cfg = ModelConfig(n_agents=10, signal=ExternalSignal(0.0, 0.0, 0.0, 0.0))
    rec = simulate_path(cfg, 1, record_events=True)
    assert rec.n_events == 0
    assert np.all(rec.m_plus_path == 0.0)


def test_event_budget():
    cfg = ModelConfig(n_agents=100, event_budget=10)
    with pytest.raises(EventBudgetExceeded) as exc:
        simulate_path(cfg, 1)
    assert exc.value.budget == 10


def test_event_log_cap_drops_log():
    cfg = ModelConfig(n_agents=100, event_log_cap=5)
    rec = simulate_path(cfg, 1, record_events=True)
    assert rec.n_events > 5 and rec.events is None


def test_acceptance_rate_on_desk_config():
    cfg = ModelConfig(n_agents=1000)
    rates = [simulate_path(cfg, derive_seed(0, r)).acceptance_rate for r in range(20)]
    assert min(rates) > 0.2


def test_event_log_roundtrip(tmp_path):
    rec = simulate_path(ModelConfig(n_agents=20), 2, record_events=True)
    data = rec.events.to_bytes()
    assert len(data) == 8 + 13 * rec.n_events
    back = EventLog.from_bytes(data)
    assert back.to_bytes() == data
    rec.events.write(tmp_path / "ev.bin")
    assert EventLog.read(tmp_path / "ev.bin").to_bytes() == data
    first = next(iter(back))
    assert first.t_micro == back.first_time()


def test_splitmix_reference_values():
    # replicas of master seed 0 reproduce the SplitMix64 stream started at state 0
    assert [derive_seed(0, r) for r in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    assert splitmix64(0) == 0
    assert len({derive_seed(7, r) for r in range(1000)}) == 1000
    assert derive_seed(7, 0) != derive_seed(7, 0, stream=1)


# reference stepper API


def test_flow_is_exact_semigroup(desk):
    s0, _ = initial_state(desk)
    direct = flow(s0, desk, 0.7)
    split = flow(flow(s0, desk, 0.3), desk, 0.7)
    assert split.m_plus == pytest.approx(direct.m_plus, rel=1e-14)
    q = desk.signal.micro(desk.n_agents)[2] / desk.alpha
    far = flow(s0, desk, 1e3)
    assert far.m_plus == pytest.approx(q)


@pytest.mark.parametrize("agents", VARIANTS, ids=lambda a: type(a).__name__)
def test_rejection_bound_dominates(agents):
    cfg = ModelConfig(n_agents=8, agents=agents)
    state, ag = initial_state(cfg)
    bound = rejection_bound(state, cfg, cfg.window, ag)
    for t in np.linspace(0.0, cfg.window, 25):
        later = flow(state, cfg, t)
        assert variant_intensities(later, cfg, ag).sum() <= bound * (1 + 1e-12)


def test_step_thinning_sign_frequencies():
    cfg = ModelConfig(n_agents=100, signal=ExternalSignal(3.0, 1.0, 1.0, 1.0))
    state, _ = initial_state(cfg)
    lam = variant_intensities(state, cfg)[0]
    p_buy = lam[0] / lam.sum()
    rng = np.random.default_rng(1)
    buys, total = 0, 0
    for _ in range(4000):
        # a short window: the state barely moves before the first event
        out = step_thinning(state, cfg.with_(horizon=1e-4), rng)
        if out.event is not None:
            total += 1
            buys += out.event.sign == Sign.BUY
    se = math.sqrt(p_buy * (1 - p_buy) / total)
    assert abs(buys / total - p_buy) < 4 * se


def test_step_thinning_matches_simulator_in_law():
    cfg = ModelConfig(n_agents=3, horizon=0.5)
    rng = np.random.default_rng(3)
    stepped = []
    for _ in range(600):
        state, ag = initial_state(cfg)
        n = 0
        while state.t_micro < cfg.micro_horizon:
            out = step_thinning(state, cfg, rng, ag)
            state, ag = out.state, out.agents
            n += out.event is not None
        stepped.append(n)
    direct = [simulate_path(cfg, derive_seed(4, r)).n_events for r in range(600)]
    assert stats.ks_2samp(stepped, direct).pvalue > 0.001


def test_backend_lookup():
    assert "python" in available_backends()
    with pytest.raises(ValueError):
        simulate_path(ModelConfig(n_agents=2), 0, backend="fortran")
