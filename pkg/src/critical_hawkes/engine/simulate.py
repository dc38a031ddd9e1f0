"""Exact path simulation by thinning."""

from __future__ import annotations

import math

import numpy as np

from ..errors import EventBudgetExceeded, NonFiniteState
from ..params import ModelConfig, SelfExciting
from .backend import get_kernels
from .records import EventLog, HawkesPathRecord

# Renormalize the per-agent jump accumulators once alpha*(t - t_ref) exceeds this.
RENORM_EXPONENT = 64.0


def _group_arrays(config: ModelConfig):
    groups = config.groups()
    c_pp = np.array([g.plus_coeffs[0] for g in groups])
    c_pm = np.array([g.plus_coeffs[1] for g in groups])
    c_mp = np.array([g.minus_coeffs[0] for g in groups])
    c_mm = np.array([g.minus_coeffs[1] for g in groups])
    counts = np.array([float(g.count) for g in groups])
    offsets = np.array([g.offset for g in groups], dtype=np.int64)
    return c_pp, c_pm, c_mp, c_mm, counts, offsets


def simulate_path(
    config: ModelConfig,
    replica_seed: int,
    *,
    record_events: bool = False,
    backend: str | None = None,
) -> HawkesPathRecord:
    """Simulate one exact path on ``[0, sqrt(N) T]`` micro time.

    The initial memory is ``m^{+/-}(0) = a^{+/-}_N`` for every agent; between
    events the memories follow the exact exponential flow toward
    ``b_N/alpha`` and every order adds ``1/N`` to the mean of its side.

    Raises :class:`EventBudgetExceeded` when the path needs more than
    ``config.event_budget`` events.
    """
    kern = get_kernels(backend)
    f = config.intensity
    alpha = config.alpha
    a_p, a_m, b_p, b_m = config.signal.micro(config.n_agents)
    micro_grid = config.micro_grid()
    n_grid = micro_grid.shape[0]
    out_mp = np.empty(n_grid)
    out_mm = np.empty(n_grid)
    out_cp = np.zeros(n_grid, dtype=np.int64)
    out_cm = np.zeros(n_grid, dtype=np.int64)
    cap = config.event_log_cap if record_events else 0
    ev_t = np.empty(cap)
    ev_agent = np.empty(cap, dtype=np.uint32)
    ev_sign = np.empty(cap, dtype=np.uint8)
    bitgen = np.random.PCG64(int(replica_seed))
    agent_x = None

    if isinstance(config.agents, SelfExciting):
        ag = config.agents
        n = config.n_agents
        j_plus = np.zeros(n)
        j_minus = np.zeros(n)
        status, n_events, n_prop, n_cand, t_stop, t_ref = kern.run_self_exciting(
            bitgen, f.kind_code, f.p, f.s, ag.beta, ag.gamma, ag.kappa / math.sqrt(n),
            alpha, n, a_p, a_m, b_p, b_m, config.micro_horizon, config.window, RENORM_EXPONENT,
            micro_grid, out_mp, out_mm, out_cp, out_cm, ev_t, ev_agent, ev_sign,
            config.event_budget, j_plus, j_minus,
        )
        if status == 0:
            t_end = config.micro_horizon
            qp, qm = b_p / alpha, b_m / alpha
            e0 = math.exp(-alpha * (t_end - t_ref))
            e = math.exp(-alpha * t_end)
            agent_x = ((a_p - qp) * e + qp + e0 * j_plus, (a_m - qm) * e + qm + e0 * j_minus)
    else:
        c_pp, c_pm, c_mp, c_mm, counts, offsets = _group_arrays(config)
        status, n_events, n_prop, n_cand, t_stop = kern.run_grouped(
            bitgen, f.kind_code, f.p, f.s, c_pp, c_pm, c_mp, c_mm, counts, offsets,
            alpha, 1.0 / config.n_agents, a_p, a_m, b_p, b_m, config.micro_horizon, config.window,
            micro_grid, out_mp, out_mm, out_cp, out_cm, ev_t, ev_agent, ev_sign,
            config.event_budget,
        )
    if status == 1:
        raise EventBudgetExceeded(n_events, config.event_budget, t_stop)
    if status == 2:
        raise NonFiniteState(f"non-finite intensity bound at micro time {t_stop!r}")

    events = None
    if record_events and n_events <= cap:
        events = EventLog(ev_t[:n_events].copy(), ev_agent[:n_events].copy(), ev_sign[:n_events].copy())
    return HawkesPathRecord(
        config=config,
        grid=config.grid(),
        m_plus_path=out_mp,
        m_minus_path=out_mm,
        count_plus_path=out_cp,
        count_minus_path=out_cm,
        n_events=int(n_events),
        n_proposals=int(n_prop),
        n_candidates=int(n_cand),
        events=events,
        agent_x_plus=None if agent_x is None else agent_x[0],
        agent_x_minus=None if agent_x is None else agent_x[1],
    )
