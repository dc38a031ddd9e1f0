"""Monte Carlo estimators used to check the scaling limit.

All estimators are deterministic functions of their inputs.  Standard
errors are sample standard deviations over replicas divided by ``sqrt(R)``
unless noted otherwise; quantiles use the nearest-rank rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .engine.records import HawkesPathRecord
from .ensemble import MacroEnsemble
from .errors import IllConditioned, InsufficientReplicas
from .params import ModelConfig, SelfExciting

QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)
EPS_FRACTION = 0.05
REGRESSION_BINS = 128
COND_LIMIT = 1e10
MIN_COLLAPSE_REPLICAS = 100
MIN_CONVERGENCE_REPLICAS = 1000


def nearest_rank_quantiles(x: np.ndarray, levels: Sequence[float] = QUANTILE_LEVELS, axis: int = 0) -> np.ndarray:
    """Nearest-rank quantiles: the ``ceil(q n)``-th smallest value (rank at least 1)."""
    xs = np.sort(np.asarray(x, dtype=float), axis=axis)
    n = xs.shape[axis]
    ranks = [min(n, max(1, math.ceil(q * n))) - 1 for q in levels]
    return np.take(xs, ranks, axis=axis)


@dataclass(frozen=True)
class SeriesStats:
    mean: np.ndarray
    var: np.ndarray
    se: np.ndarray
    quantiles: np.ndarray  # (len(QUANTILE_LEVELS), G)


def _series(x: np.ndarray) -> SeriesStats:
    r = x.shape[0]
    var = x.var(axis=0, ddof=1) if r > 1 else np.zeros(x.shape[1])
    return SeriesStats(x.mean(axis=0), var, np.sqrt(var / r), nearest_rank_quantiles(x))


@dataclass(frozen=True)
class EnsembleStats:
    grid: np.ndarray
    replicas: int
    pi: SeriesStats
    y: SeriesStats
    z: SeriesStats
    increment_corr: np.ndarray
    sup_abs_z: np.ndarray

    def rows(self):
        """Long-format ``(t, stat, value, stderr)`` rows."""
        for name in ("pi", "y", "z"):
            s = getattr(self, name)
            for i, t in enumerate(self.grid):
                yield t, f"{name}_mean", s.mean[i], s.se[i]
                yield t, f"{name}_var", s.var[i], math.nan
                for q, row in zip(QUANTILE_LEVELS, s.quantiles):
                    yield t, f"{name}_q{int(round(100 * q)):02d}", row[i], math.nan
        for i, t in enumerate(self.grid[1:]):
            yield t, "corr_dpi_dy", self.increment_corr[i], math.nan


def _corr_columns(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    den = np.sqrt((a * a).sum(axis=0) * (b * b).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, (a * b).sum(axis=0) / np.where(den > 0, den, 1.0), np.nan)


def ensemble_stats(ens: MacroEnsemble, eps: float | None = None) -> EnsembleStats:
    eps = EPS_FRACTION * ens.horizon if eps is None else eps
    window = (ens.grid >= eps)[None, :] & ens.before_tau()
    sup_abs_z = np.where(window, np.abs(ens.z), 0.0).max(axis=1)
    return EnsembleStats(
        grid=ens.grid,
        replicas=ens.replicas,
        pi=_series(ens.pi),
        y=_series(ens.y),
        z=_series(ens.z),
        increment_corr=_corr_columns(np.diff(ens.pi, axis=1), np.diff(ens.y, axis=1)),
        sup_abs_z=sup_abs_z,
    )


# --- collapse of the imbalance mode ---------------------------------------


@dataclass(frozen=True)
class CollapseRow:
    n_agents: int
    sup_z2: float
    sup_z2_se: float
    z4_scaled: float
    z4_scaled_se: float
    hit_fraction: float


@dataclass(frozen=True)
class CollapseTable:
    rows: tuple[CollapseRow, ...]
    eps: float
    h: float
    t_star: float

    @property
    def sup_strictly_decreasing(self) -> bool:
        v = [r.sup_z2 for r in self.rows]
        return all(b < a for a, b in zip(v, v[1:]))

    @property
    def sup_ratio(self) -> float:
        first = self.rows[0].sup_z2
        return self.rows[-1].sup_z2 / first if first > 0 else (0.0 if self.rows[-1].sup_z2 == 0 else math.inf)

    @property
    def z4_ratio(self) -> float:
        first = self.rows[0].z4_scaled
        return self.rows[-1].z4_scaled / first if first > 0 else (0.0 if self.rows[-1].z4_scaled == 0 else math.inf)

    @property
    def passed(self) -> bool:
        return self.sup_strictly_decreasing and self.sup_ratio < 0.5 and self.z4_ratio <= 2.0


def collapse_diagnostic(
    ensembles: Sequence[MacroEnsemble],
    eps: float | None = None,
    h: float | None = None,
    t_star: float | None = None,
) -> CollapseTable:
    """``E[sup_{[eps, T ^ tau_h]} Z^2]`` and ``sqrt(N) E[Z^4(t*) ; t* <= tau_h]`` per ``N``.

    ``h`` defaults to the level each ensemble was built with.
    """
    if len(ensembles) < 3:
        raise ValueError("the collapse diagnostic needs at least three values of N")
    ens_sorted = sorted(ensembles, key=lambda e: e.n_agents)
    horizon = ens_sorted[0].horizon
    eps = EPS_FRACTION * horizon if eps is None else eps
    if not eps > 0:
        raise ValueError("eps must be positive")
    t_star = 0.5 * horizon if t_star is None else t_star
    rows = []
    for ens in ens_sorted:
        if ens.replicas < MIN_COLLAPSE_REPLICAS:
            raise InsufficientReplicas(f"{ens.replicas} replicas < {MIN_COLLAPSE_REPLICAS}")
        if h is not None and h != ens.h:
            above = ens.y > h
            hit = np.where(above.any(axis=1), above.argmax(axis=1), ens.grid.shape[0])
            mask = np.arange(ens.grid.shape[0])[None, :] <= hit[:, None]
        else:
            hit = ens.hit_index
            mask = ens.before_tau()
        window = (ens.grid >= eps)[None, :] & mask
        sup_z2 = np.where(window, ens.z**2, 0.0).max(axis=1)
        k = ens.index_of(t_star)
        z4 = np.where(hit >= k, ens.z[:, k] ** 4, 0.0) * math.sqrt(ens.n_agents)
        r = ens.replicas
        rows.append(
            CollapseRow(
                ens.n_agents,
                float(sup_z2.mean()),
                float(sup_z2.std(ddof=1) / math.sqrt(r)),
                float(z4.mean()),
                float(z4.std(ddof=1) / math.sqrt(r)),
                float(np.mean(hit < ens.grid.shape[0])),
            )
        )
    return CollapseTable(tuple(rows), eps, float(ens_sorted[0].h if h is None else h), t_star)


# --- convergence in distribution ------------------------------------------


def ks_critical_value(n: int, m: int, alpha: float = 0.05) -> float:
    """Asymptotic two-sample KS critical value ``c(alpha) sqrt((n+m)/(n m))``."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) * math.sqrt((n + m) / (n * m))


@dataclass(frozen=True)
class ConvergenceResult:
    t: float
    ks_pi: float
    ks_y: float
    p_pi: float
    p_y: float


def convergence_metric(
    hawkes: MacroEnsemble,
    limit: MacroEnsemble,
    t: float,
    min_replicas: int = MIN_CONVERGENCE_REPLICAS,
) -> ConvergenceResult:
    """Two-sample KS distances between the marginals of ``Pi``/``Y`` and ``pi``/``y`` at ``t``."""
    if not t > 0:
        raise ValueError("marginals are compared at t > 0 only")
    if min(hawkes.replicas, limit.replicas) < min_replicas:
        raise InsufficientReplicas(f"need at least {min_replicas} replicas per ensemble")
    i, j = hawkes.index_of(t), limit.index_of(t)
    kp = stats.ks_2samp(hawkes.pi[:, i], limit.pi[:, j])
    ky = stats.ks_2samp(hawkes.y[:, i], limit.y[:, j])
    return ConvergenceResult(float(t), float(kp.statistic), float(ky.statistic), float(kp.pvalue), float(ky.pvalue))


# --- drift regression ------------------------------------------------------


@dataclass(frozen=True)
class DriftFit:
    """``E[dY | Y = y]/dt ~ c0 + c1 y + c2 y^2`` with HC0 standard errors."""

    coef: np.ndarray
    se: np.ndarray
    cond: float
    n_obs: int
    bin_dt: float

    def within(self, index: int, target: float, n_se: float = 4.0) -> bool:
        return abs(self.coef[index] - target) <= n_se * self.se[index]

    def z_score(self, index: int, target: float) -> float:
        return float((self.coef[index] - target) / self.se[index])


def _bin_step(grid: np.ndarray, bin_dt: float | None) -> int:
    dt = grid[1] - grid[0]
    bin_dt = (grid[-1] - grid[0]) / REGRESSION_BINS if bin_dt is None else bin_dt
    return max(1, int(round(bin_dt / dt)))


def drift_regression(ens: MacroEnsemble, bin_dt: float | None = None, respect_tau: bool = True) -> DriftFit:
    """Least squares of binned increments of ``Y`` on ``(1, y, y^2)``.

    Bins are non-overlapping and, with ``respect_tau``, end no later than
    ``tau_h``.
    """
    step = _bin_step(ens.grid, bin_dt)
    dt = float(ens.grid[step] - ens.grid[0])
    starts = np.arange(0, ens.grid.shape[0] - step, step)
    y0 = ens.y[:, starts]
    dy = (ens.y[:, starts + step] - y0) / dt
    keep = np.ones_like(y0, dtype=bool)
    if respect_tau:
        keep = (starts + step)[None, :] <= ens.hit_index[:, None]
    y0, dy = y0[keep], dy[keep]
    x = np.column_stack([np.ones_like(y0), y0, y0 * y0])
    cond = float(np.linalg.cond(x))
    if not cond <= COND_LIMIT:
        raise IllConditioned(f"design matrix condition number {cond:.3g} exceeds {COND_LIMIT:.0e}")
    xtx_inv = np.linalg.inv(x.T @ x)
    coef = xtx_inv @ (x.T @ dy)
    resid = dy - x @ coef
    meat = (x * (resid * resid)[:, None]).T @ x
    cov = xtx_inv @ meat @ xtx_inv
    return DriftFit(coef, np.sqrt(np.diag(cov)), cond, int(y0.size), dt)


# --- leverage ----------------------------------------------------------------


@dataclass(frozen=True)
class LeverageEstimate:
    times: np.ndarray
    series: np.ndarray
    pooled: float
    se: float
    n_obs: int

    def within(self, target: float, n_se: float = 4.0) -> bool:
        return abs(self.pooled - target) <= n_se * self.se


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    return float((a * b).sum() / math.sqrt((a * a).sum() * (b * b).sum()))


def leverage_estimate(
    ens: MacroEnsemble,
    bin_dt: float | None = None,
    n_groups: int = 20,
    y_floor: float = 0.0,
) -> LeverageEstimate:
    """Pooled correlation of ``dPi/sqrt(Y dt)`` and ``dY/sqrt(Y dt)``.

    Increments use non-overlapping bins (default ``T/128``) restricted to
    ``t <= tau_h`` and ``Y > y_floor`` at the bin start.  The standard
    error is a grouped jackknife over ``n_groups`` contiguous replica blocks.
    """
    step = _bin_step(ens.grid, bin_dt)
    dt = float(ens.grid[step] - ens.grid[0])
    starts = np.arange(0, ens.grid.shape[0] - step, step)
    y0 = ens.y[:, starts]
    scale = np.sqrt(np.maximum(y0, 0.0) * dt)
    keep = (y0 > y_floor) & ((starts + step)[None, :] <= ens.hit_index[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(keep, (ens.pi[:, starts + step] - ens.pi[:, starts]) / scale, 0.0)
        b = np.where(keep, (ens.y[:, starts + step] - y0) / scale, 0.0)
    pooled = _pearson(a[keep], b[keep])
    series = np.array([_pearson(a[keep[:, j], j], b[keep[:, j], j]) if keep[:, j].sum() > 2 else np.nan for j in range(starts.size)])
    groups = np.array_split(np.arange(ens.replicas), min(n_groups, ens.replicas))
    loo = []
    for g in groups:
        sel = np.ones(ens.replicas, dtype=bool)
        sel[g] = False
        k = keep[sel]
        loo.append(_pearson(a[sel][k], b[sel][k]))
    loo = np.array(loo)
    ng = loo.size
    se = math.sqrt((ng - 1) / ng * np.sum((loo - loo.mean()) ** 2))
    return LeverageEstimate(ens.grid[starts + step], series, pooled, se, int(keep.sum()))


# --- moment scaling ----------------------------------------------------------


@dataclass(frozen=True)
class MomentScaling:
    q: np.ndarray
    h: np.ndarray
    exponents: np.ndarray
    moments: np.ndarray  # (len(q), len(h))


def moment_scaling(
    paths: np.ndarray,
    grid: np.ndarray,
    q_list: Sequence[float],
    h_steps: Sequence[int],
    t_start: float | None = None,
) -> MomentScaling:
    """Slopes ``A(q)`` of ``log E|X(t+h) - X(t)|^q`` against ``log h``.

    Increments start at grid times ``t >= t_start`` (default ``T/2``) and
    end within the grid.  ``h_steps`` are lags in grid steps and must span
    at least 1.5 decades.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    h_steps = np.asarray(sorted(set(int(h) for h in h_steps)))
    if h_steps[0] < 1 or math.log10(h_steps[-1] / h_steps[0]) < 1.5 - 1e-12:
        raise ValueError("lags must be positive and span at least 1.5 decades")
    t_start = 0.5 * grid[-1] if t_start is None else t_start
    i0 = int(np.searchsorted(grid, t_start - 1e-12 * max(1.0, abs(t_start))))
    n = grid.shape[0]
    if i0 + h_steps[-1] >= n:
        raise ValueError("largest lag does not fit after t_start")
    dt = grid[1] - grid[0]
    q = np.asarray(q_list, dtype=float)
    moments = np.empty((q.size, h_steps.size))
    for j, h in enumerate(h_steps):
        inc = np.abs(paths[:, i0 + h :] - paths[:, i0 : n - h]).ravel()
        for i, qq in enumerate(q):
            moments[i, j] = 1.0 if qq == 0 else float(np.mean(inc**qq))
    logh = np.log(h_steps * dt)
    exps = np.array([np.polyfit(logh, np.log(moments[i]), 1)[0] for i in range(q.size)])
    return MomentScaling(q, h_steps * dt, exps, moments)


# --- fine-grid oracle --------------------------------------------------------


@dataclass(frozen=True)
class OracleSample:
    counts: np.ndarray
    first_times: np.ndarray
    dt: float


def _agent_coeffs(config: ModelConfig):
    """Per-agent ``(beta, gamma)`` arrays in agent-id order."""
    if isinstance(config.agents, SelfExciting):
        n = config.n_agents
        return np.full(n, config.agents.beta), np.full(n, config.agents.gamma)
    betas, gammas = [], []
    for g in config.groups():
        betas += [g.beta] * g.count
        gammas += [g.gamma] * g.count
    return np.array(betas), np.array(gammas)


def oracle_simulate(
    config: ModelConfig,
    dt_fine: float,
    seed: int,
    replicas: int = 2000,
    frozen: bool = False,
) -> OracleSample:
    """Fine-grid Bernoulli discretization of the agent dynamics (N <= 4).

    In each step of length ``dt_fine`` every agent places a buy with
    probability ``lambda^+ dt_fine`` and a sell with probability
    ``lambda^- dt_fine``, intensities evaluated at the start of the step;
    memories then decay exactly over the step and jump by one per order.
    Event times are reported at step midpoints.  ``frozen`` disables the
    jumps, turning every agent into a Poisson source.
    """
    n = config.n_agents
    if n > 4:
        raise ValueError("the oracle is meant for N <= 4")
    f = config.intensity
    alpha = config.alpha
    a_p, a_m, b_p, b_m = config.signal.micro(n)
    qp, qm = b_p / alpha, b_m / alpha
    beta, gamma = _agent_coeffs(config)
    bg = beta * gamma
    cmm = 1.0 + (beta - 1.0) * gamma
    kappa = config.agents.kappa / math.sqrt(n) if isinstance(config.agents, SelfExciting) else 0.0
    n_steps = int(round(config.micro_horizon / dt_fine))
    dt = config.micro_horizon / n_steps
    decay = math.exp(-alpha * dt)
    rng = np.random.Generator(np.random.PCG64(seed))
    xp = np.full((replicas, n), a_p)
    xm = np.full((replicas, n), a_m)
    counts = np.zeros(replicas, dtype=np.int64)
    first = np.full(replicas, np.inf)
    for k in range(n_steps):
        mp = xp.mean(axis=1, keepdims=True)
        mm = xm.mean(axis=1, keepdims=True)
        ip, im = mp + kappa * xp, mm + kappa * xm
        lp = f(ip + bg * im)
        lm = f(gamma * ip + cmm * im)
        u = rng.random((2, replicas, n))
        fire_p = u[0] < lp * dt
        fire_m = u[1] < lm * dt
        fired = fire_p.sum(axis=1) + fire_m.sum(axis=1)
        new = (fired > 0) & np.isinf(first)
        first[new] = (k + 0.5) * dt
        counts += fired
        xp = (xp - qp) * decay + qp
        xm = (xm - qm) * decay + qm
        if not frozen:
            xp += fire_p
            xm += fire_m
    return OracleSample(counts, first, dt)


# --- compensator identity ------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class CompensatorResult:
    """Residual ``m(t) - [a_N + b_N t - alpha int m + int mean_i lambda_i]`` per sign.

    Arrays have shape ``(R, G, 2)`` for ``residual`` and ``(G, 2)`` for the
    summaries; column 0 is the buy side.
    """

    grid: np.ndarray
    residual: np.ndarray
    mean: np.ndarray
    se: np.ndarray

    @property
    def max_abs_z(self) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.se > 0, np.abs(self.mean) / np.where(self.se > 0, self.se, 1.0), 0.0)
        return float(z.max())

    def passed(self, n_se: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.mean) <= n_se * self.se))


def _path_residual(rec: HawkesPathRecord) -> np.ndarray:
    cfg = rec.config
    if rec.events is None:
        raise ValueError("the compensator replay needs the event log (record_events=True)")
    n = cfg.n_agents
    alpha = cfg.alpha
    a_p, a_m, b_p, b_m = cfg.signal.micro(n)
    q = np.array([b_p / alpha, b_m / alpha])
    a = np.array([a_p, a_m])
    grid = cfg.micro_grid()
    ev_t = rec.events.t
    ev_s = rec.events.sign.astype(np.int64)
    ev_a = rec.events.agent.astype(np.int64)
    # segment boundaries: time 0, every event and every grid time
    bounds = np.concatenate([ev_t, grid])
    order = np.argsort(bounds, kind="stable")
    bounds = bounds[order]
    is_event = order < ev_t.size
    # segment j covers [starts[j], bounds[j]) and sees the events at or before starts[j]
    starts = np.concatenate([[0.0], bounds[:-1]])
    lengths = bounds - starts
    seg_events = np.concatenate([[0], np.cumsum(is_event)[:-1]])
    # sum over events e^{-alpha (t - t_k)} via a shifted running sum
    shift = 0.5 * grid[-1]
    if alpha * shift > 600.0:
        raise ValueError("micro horizon too long for the closed-form replay")
    w = np.exp(alpha * (ev_t - shift))
    self_exc = isinstance(cfg.agents, SelfExciting)
    f = cfg.intensity
    nodes = starts[:, None] + 0.5 * lengths[:, None] * (_GL_NODES[None, :] + 1.0)
    wts = 0.5 * lengths[:, None] * _GL_WEIGHTS[None, :]
    base = q[None, :] + (a - q)[None, :] * np.exp(-alpha * starts)[:, None]  # (S, 2)
    decay_nodes = np.exp(-alpha * (nodes - starts[:, None]))  # (S, k)

    def cum_side(mask):
        c = np.concatenate([[0.0], np.cumsum(np.where(mask, w, 0.0))])
        return c[seg_events] * np.exp(-alpha * (starts - shift))

    m_start = np.empty((starts.size, 2))
    for s in (0, 1):
        m_start[:, s] = base[:, s] + cum_side(ev_s == s) / n
    # flow inside a segment: m(t) = (m_start - q) e^{-alpha (t - start)} + q
    m_nodes = (m_start[:, None, :] - q[None, None, :]) * decay_nodes[:, :, None] + q[None, None, :]
    if self_exc:
        ag = cfg.agents
        kap = ag.kappa / math.sqrt(n)
        bg = ag.beta * ag.gamma
        cmm = 1.0 + (ag.beta - 1.0) * ag.gamma
        lam = np.zeros(nodes.shape + (2,))
        for i in range(n):
            xs = np.empty((starts.size, 2))
            for s in (0, 1):
                xs[:, s] = base[:, s] + cum_side((ev_s == s) & (ev_a == i))
            x_nodes = (xs[:, None, :] - q[None, None, :]) * decay_nodes[:, :, None] + q[None, None, :]
            ip = m_nodes[..., 0] + kap * x_nodes[..., 0]
            im = m_nodes[..., 1] + kap * x_nodes[..., 1]
            lam[..., 0] += f(ip + bg * im) / n
            lam[..., 1] += f(ag.gamma * ip + cmm * im) / n
    else:
        lam = np.zeros(nodes.shape + (2,))
        for g in cfg.groups():
            (pp, pm), (mp_, mm_) = g.plus_coeffs, g.minus_coeffs
            lam[..., 0] += g.count / n * f(pp * m_nodes[..., 0] + pm * m_nodes[..., 1])
            lam[..., 1] += g.count / n * f(mp_ * m_nodes[..., 0] + mm_ * m_nodes[..., 1])
    int_lam = (lam * wts[:, :, None]).sum(axis=1)  # (S, 2)
    int_m = q[None, :] * lengths[:, None] + (m_start - q[None, :]) * (-np.expm1(-alpha * lengths))[:, None] / alpha
    cum_lam = np.concatenate([np.zeros((1, 2)), np.cumsum(int_lam, axis=0)])
    cum_m = np.concatenate([np.zeros((1, 2)), np.cumsum(int_m, axis=0)])
    # grid boundary j sits at segment index (position in bounds) + 1
    gpos = np.flatnonzero(~is_event) + 1
    b = np.array([b_p, b_m])
    m_grid = np.column_stack([rec.m_plus_path, rec.m_minus_path])
    comp = a[None, :] + b[None, :] * grid[:, None] - alpha * cum_m[gpos] + cum_lam[gpos]
    return m_grid - comp


def compensator_residual(records: Sequence[HawkesPathRecord]) -> CompensatorResult:
    """Compensated memory residuals of replayed paths.

    Between consecutive events and grid times the memory flow is exact, so
    ``int m`` is analytic and ``int lambda`` uses 6-point Gauss-Legendre
    quadrature per segment.  The mean residual vanishes for every ``t``
    because it is a martingale started at zero.
    """
    res = np.stack([_path_residual(r) for r in records])
    r = res.shape[0]
    mean = res.mean(axis=0)
    se = res.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.zeros_like(mean)
    return CompensatorResult(records[0].grid, res, mean, se)
