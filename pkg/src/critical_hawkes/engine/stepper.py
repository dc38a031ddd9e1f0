"""Reference single-step thinning API.

These functions expose the building blocks of the kernels one step at a
time: the exact flow between events, the thinning majorant, per-variant
intensities and one thinning step.  The self-exciting variant is handled
here with an ``O(N)`` refresh at every candidate, which keeps it an
independent check on the compiled mixture sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..params import ModelConfig, SelfExciting, eval_intensity
from .records import EventRecord, Sign


@dataclass(frozen=True)
class SufficientState:
    m_plus: float
    m_minus: float
    count_plus: int = 0
    count_minus: int = 0
    t_micro: float = 0.0


@dataclass(frozen=True)
class AgentStates:
    """Per-agent memories, each valid at its own ``last_update`` time.

    The value at ``t`` is ``x e^{-alpha (t - last_update)} + q (1 - e^{-alpha (t - last_update)})``
    with ``q = b_N / alpha``.
    """

    x_plus: np.ndarray
    x_minus: np.ndarray
    last_update: np.ndarray

    def at(self, t: float, alpha: float, q_plus: float, q_minus: float) -> tuple[np.ndarray, np.ndarray]:
        decay = np.exp(-alpha * (t - self.last_update))
        return ((self.x_plus - q_plus) * decay + q_plus, (self.x_minus - q_minus) * decay + q_minus)


@dataclass(frozen=True)
class StepOutcome:
    """Result of :func:`step_thinning`; ``event`` is ``None`` when the window expired."""

    event: EventRecord | None
    state: SufficientState
    agents: AgentStates | None
    n_candidates: int

    @property
    def window_expired(self) -> bool:
        return self.event is None


def _fixed_points(config: ModelConfig) -> tuple[float, float]:
    _, _, b_p, b_m = config.signal.micro(config.n_agents)
    return b_p / config.alpha, b_m / config.alpha


def initial_state(config: ModelConfig) -> tuple[SufficientState, AgentStates | None]:
    a_p, a_m, _, _ = config.signal.micro(config.n_agents)
    state = SufficientState(a_p, a_m)
    agents = None
    if isinstance(config.agents, SelfExciting):
        n = config.n_agents
        agents = AgentStates(np.full(n, a_p), np.full(n, a_m), np.zeros(n))
    return state, agents


def flow(state: SufficientState, config: ModelConfig, t: float) -> SufficientState:
    """Exact event-free evolution of ``state`` to micro time ``t``."""
    qp, qm = _fixed_points(config)
    decay = math.exp(-config.alpha * (t - state.t_micro))
    return replace(
        state,
        m_plus=(state.m_plus - qp) * decay + qp,
        m_minus=(state.m_minus - qm) * decay + qm,
        t_micro=t,
    )


def variant_intensities(state: SufficientState, config: ModelConfig, agents: AgentStates | None = None) -> np.ndarray:
    """Aggregate intensities, shape ``(G, 2)`` with columns (buy, sell).

    Rows are the single homogeneous population, the atoms of an
    inhomogeneous law (each multiplied by its agent count), or the
    individual agents of the self-exciting variant.
    """
    f = config.intensity
    mp, mm = state.m_plus, state.m_minus
    if isinstance(config.agents, SelfExciting):
        if agents is None:
            raise ValueError("the self-exciting variant needs per-agent states")
        ag = config.agents
        qp, qm = _fixed_points(config)
        xp, xm = agents.at(state.t_micro, config.alpha, qp, qm)
        k = ag.kappa / math.sqrt(config.n_agents)
        ip, im = mp + k * xp, mm + k * xm
        bg = ag.beta * ag.gamma
        lam_p = eval_intensity(f, ip + bg * im)
        lam_m = eval_intensity(f, ag.gamma * ip + (1.0 + (ag.beta - 1.0) * ag.gamma) * im)
        return np.column_stack([lam_p, lam_m])
    rows = []
    for g in config.groups():
        (pp, pm), (qp_, qm_) = g.plus_coeffs, g.minus_coeffs
        rows.append([g.count * eval_intensity(f, pp * mp + pm * mm), g.count * eval_intensity(f, qp_ * mp + qm_ * mm)])
    return np.asarray(rows, dtype=float)


def rejection_bound(
    state: SufficientState,
    config: ModelConfig,
    window_end: float | None = None,
    agents: AgentStates | None = None,
) -> float:
    """Upper bound on the total intensity after ``state.t_micro``.

    Every memory coordinate moves monotonically toward its fixed point
    ``b_N/alpha`` between events, so replacing it by ``max(current, fixed point)``
    bounds it on any event-free interval; intensities are nondecreasing in
    each coordinate.  ``window_end`` does not tighten the bound and is
    accepted for interface symmetry.
    """
    if window_end is not None and window_end < state.t_micro:
        raise ValueError("window_end precedes the state time")
    qp, qm = _fixed_points(config)
    up = SufficientState(max(state.m_plus, qp), max(state.m_minus, qm), t_micro=state.t_micro)
    if agents is not None:
        xp, xm = agents.at(state.t_micro, config.alpha, qp, qm)
        agents = AgentStates(np.maximum(xp, qp), np.maximum(xm, qm), np.full(xp.shape, state.t_micro))
    return float(variant_intensities(up, config, agents).sum())


def step_thinning(
    state: SufficientState,
    config: ModelConfig,
    rng: np.random.Generator,
    agents: AgentStates | None = None,
) -> StepOutcome:
    """Advance to the next accepted event or to the end of the current window.

    Candidates arrive at the rate of :func:`rejection_bound`; a candidate
    at time ``t`` is accepted with probability ``total(t)/bound`` and the
    (group or agent, sign) pair is drawn proportionally to the individual
    intensities, scanning rows in order, buy before sell.
    """
    t_end = config.micro_horizon
    w_end = min(state.t_micro + config.window, t_end)
    n_cand = 0
    qp, qm = _fixed_points(config)
    groups = None if agents is not None else config.groups()
    while True:
        bound = rejection_bound(state, config, w_end, agents)
        cand = state.t_micro - math.log1p(-rng.random()) / bound if bound > 0 else math.inf
        if cand >= w_end:
            return StepOutcome(None, flow(state, config, w_end), agents, n_cand)
        state = flow(state, config, cand)
        n_cand += 1
        lam = variant_intensities(state, config, agents)
        total = float(lam.sum())
        x = rng.random() * bound
        if x >= total:
            continue
        flat = np.cumsum(lam.ravel())
        idx = min(int(np.searchsorted(flat, x, side="right")), flat.size - 1)
        row, sign = divmod(idx, 2)
        if agents is not None:
            agent = row
            xp, xm = agents.at(cand, config.alpha, qp, qm)
            xp, xm = xp.copy(), xm.copy()
            if sign == 0:
                xp[agent] += 1.0
            else:
                xm[agent] += 1.0
            agents = AgentStates(xp, xm, np.full(xp.shape, cand))
        else:
            g = groups[row]
            lo = flat[idx - 1] if idx else 0.0
            frac = (x - lo) / lam.ravel()[idx]
            agent = g.offset + min(int(frac * g.count), g.count - 1)
        inv_n = 1.0 / config.n_agents
        if sign == 0:
            state = replace(state, m_plus=state.m_plus + inv_n, count_plus=state.count_plus + 1)
        else:
            state = replace(state, m_minus=state.m_minus + inv_n, count_minus=state.count_minus + 1)
        return StepOutcome(EventRecord(cand, agent, Sign(sign)), state, agents, n_cand)
