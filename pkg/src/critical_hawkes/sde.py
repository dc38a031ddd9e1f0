"""Limit stochastic-volatility system: simulation and boundary behaviour.

    d pi = beta_pi dt + sigma_pi sqrt(f'(0) y) dW
    d y  = (beta_y + theta_y y + alpha_y f''(0) y^2) dt + sigma_y sqrt(f'(0) y) dB
    d<W, B> = rho dt
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, IntegrationFailure, NonFinitePath, NotApplicable
from .params import LimitSdeParams
from .rescale import MacroPath
from .seeding import derive_seed

DEFAULT_LOG2_STEPS = 14
DIVERGENCE_THRESHOLD = 1e8
NODES_PER_DECADE = 10_000
SDE_BLOCK = 256


class SchemeKind(str, Enum):
    FULL_TRUNCATION_EULER = "full_truncation_euler"
    REFLECTED_EULER = "reflected_euler"


@dataclass(frozen=True)
class SdeScheme:
    kind: SchemeKind
    dt: float
    n_steps: int

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.n_steps < 1 or not self.dt > 0:
            raise ValueError("an SDE scheme needs dt > 0 and at least one step")

    @property
    def horizon(self) -> float:
        return self.dt * self.n_steps

    @classmethod
    def for_horizon(
        cls,
        horizon: float,
        kind: SchemeKind | str = SchemeKind.FULL_TRUNCATION_EULER,
        n_steps: int = 2**DEFAULT_LOG2_STEPS,
    ) -> "SdeScheme":
        return cls(SchemeKind(kind), horizon / n_steps, int(n_steps))


class BoundaryBehavior(str, Enum):
    REFLECTED_UPWARD = "ReflectedUpward"
    UNATTAINABLE = "Unattainable"


@dataclass(frozen=True)
class BoundaryClass:
    attainable: bool
    behavior: BoundaryBehavior


def feller_constants(params: LimitSdeParams) -> tuple[float, float, float]:
    """``(a, b, c)`` of ``dX = sqrt(2 a X) dW + (c - b X^2) dt``."""
    a = 0.5 * params.sigma_y**2 * params.f_prime0
    b = -params.alpha_y * params.f_second0
    return a, b, params.beta_y


def classify_boundary(params: LimitSdeParams) -> BoundaryClass:
    """Attainability of ``y = 0`` for the quadratic-drift volatility.

    With ``a = sigma_y^2 f'(0)/2`` and ``c = beta_y``: ``0 < c < a`` makes
    the origin attainable with upward reflection, ``c >= a`` keeps the
    process strictly positive.  A linear drift term (``theta_y != 0``) or
    ``c <= 0`` falls outside this rule; use :func:`scale_integrals`.
    """
    if params.theta_y != 0.0:
        raise NotApplicable("a linear volatility drift is outside the analytic classification; use scale_integrals")
    a, b, c = feller_constants(params)
    if not (a > 0 and b > 0 and c > 0):
        raise NotApplicable(f"the classification needs a, b, c > 0 (got a={a}, b={b}, c={c})")
    if c >= a:
        return BoundaryClass(False, BoundaryBehavior.UNATTAINABLE)
    return BoundaryClass(True, BoundaryBehavior.REFLECTED_UPWARD)


@dataclass(frozen=True)
class ScaleVerdict:
    """Scale-function integrals ``S(x) = int_1^x s(u) du`` toward both ends.

    ``lower_value`` is ``-S(x_lo)`` (a positive number) and ``upper_value``
    is ``S(x_hi)``; the ``*_divergent`` flags are the verdicts on the limits
    ``x -> 0+`` and ``x -> +inf``.  ``lower_tail_ratio`` is the ratio of the
    last two per-decade increments, used to extrapolate the lower tail.
    """

    lower_divergent: bool
    lower_value: float
    lower_extrapolated: float
    lower_tail_ratio: float
    upper_divergent: bool
    upper_value: float

    @property
    def attainable(self) -> bool:
        return not self.lower_divergent

    def to_boundary_class(self) -> BoundaryClass:
        if self.attainable:
            return BoundaryClass(True, BoundaryBehavior.REFLECTED_UPWARD)
        return BoundaryClass(False, BoundaryBehavior.UNATTAINABLE)


def log_scale_density(params: LimitSdeParams, u: np.ndarray) -> np.ndarray:
    """``log s(u) = -int_1^u 2 mu / sigma^2`` (exact antiderivative)."""
    k = 2.0 / (params.sigma_y**2 * params.f_prime0)
    q = params.alpha_y * params.f_second0
    return -k * (params.beta_y * np.log(u) + params.theta_y * (u - 1.0) + 0.5 * q * (u * u - 1.0))


def _decade_integrals(params: LimitSdeParams, lo_exp: float, hi_exp: float) -> np.ndarray:
    """Log-space trapezoid integrals of ``s`` over consecutive decades, returned as logs."""
    n_dec = int(round(abs(hi_exp - lo_exp)))
    out = np.empty(n_dec)
    step = math.log(10.0) / NODES_PER_DECADE
    direction = 1.0 if hi_exp > lo_exp else -1.0
    for d in range(n_dec):
        start = (lo_exp + direction * d) * math.log(10.0)
        v = start + direction * step * np.arange(NODES_PER_DECADE + 1)
        # integrand in v = log u is s(u) u
        logg = log_scale_density(params, np.exp(v)) + v
        if np.any(np.isnan(logg)) or np.any(logg == -math.inf) and not np.all(logg == -math.inf):
            raise IntegrationFailure("non-finite scale density")
        m = np.max(logg)
        if not np.isfinite(m):
            out[d] = math.inf
            continue
        w = np.exp(logg - m)
        out[d] = m + math.log(step * (w.sum() - 0.5 * (w[0] + w[-1])))
    return out


def scale_integrals(params: LimitSdeParams, x_lo: float = 1e-8, x_hi: float = 1e8) -> ScaleVerdict:
    """Numerical scale-function verdicts toward ``0+`` and ``+inf``.

    The scale density is integrated on a log-spaced grid with
    ``NODES_PER_DECADE`` nodes per decade.  The lower end is declared
    divergent when the accumulated integral, or its geometric tail
    extrapolation from the last two decades, exceeds
    ``DIVERGENCE_THRESHOLD``, or when the per-decade increments stop
    shrinking.
    """
    if not (0 < x_lo < 1 < x_hi):
        raise ValueError("need 0 < x_lo < 1 < x_hi")
    if not (params.sigma_y > 0 and params.f_prime0 > 0):
        raise IntegrationFailure("the scale density needs a nondegenerate diffusion")
    log_thr = math.log(DIVERGENCE_THRESHOLD)

    lower = _decade_integrals(params, 0.0, math.log10(x_lo))
    if lower.size == 0:
        raise ValueError("x_lo must lie at least one decade below 1")
    log_lower = np.logaddexp.accumulate(lower)
    lower_value = float(np.exp(min(log_lower[-1], 700.0)))
    if lower.size >= 2 and np.isfinite(lower[-1]) and np.isfinite(lower[-2]):
        ratio = float(np.exp(lower[-1] - lower[-2]))
    else:
        ratio = math.inf
    if ratio < 1.0 - 1e-9:
        tail = float(np.exp(min(lower[-1], 700.0))) * ratio / (1.0 - ratio)
        extrapolated = lower_value + tail
    else:
        extrapolated = math.inf
    lower_div = bool(log_lower[-1] > log_thr or not extrapolated < DIVERGENCE_THRESHOLD)

    upper = _decade_integrals(params, 0.0, math.log10(x_hi))
    log_upper = np.logaddexp.accumulate(upper) if upper.size else np.array([-math.inf])
    upper_div = bool(log_upper[-1] > log_thr)
    if not upper_div and upper.size >= 2:
        upper_div = bool(upper[-1] >= upper[-2])
    upper_value = float(np.exp(min(log_upper[-1], 700.0)))
    return ScaleVerdict(lower_div, lower_value, extrapolated, ratio, upper_div, upper_value)


@dataclass(frozen=True)
class SdeEnsemble:
    """Sampled limit paths; arrays have shape ``(replicas, grid points)``."""

    grid: np.ndarray
    pi: np.ndarray
    y: np.ndarray

    @property
    def replicas(self) -> int:
        return self.pi.shape[0]

    def path(self, r: int) -> MacroPath:
        return MacroPath(self.grid, self.pi[r].copy(), self.y[r].copy(), np.zeros_like(self.grid))


def _sample_indices(n_steps: int, grid_points: int) -> np.ndarray:
    return np.rint(np.linspace(0, n_steps, grid_points + 1)).astype(np.int64)


def _run_block(params: LimitSdeParams, scheme: SdeScheme, normals: np.ndarray, sample_idx: np.ndarray):
    # normals: (n_steps, 2, R)
    n_rep = normals.shape[2]
    y = np.full(n_rep, float(params.y0))
    pi = np.full(n_rep, float(params.pi0))
    out_y = np.empty((sample_idx.size, n_rep))
    out_pi = np.empty((sample_idx.size, n_rep))
    j = 0
    while j < sample_idx.size and sample_idx[j] == 0:
        out_y[j] = np.maximum(y, 0.0)
        out_pi[j] = pi
        j += 1
    # overflow is reported below as NonFinitePath
    with np.errstate(over="ignore", invalid="ignore"):
        _advance(params, scheme, normals, sample_idx, y, pi, out_y, out_pi, j)
    if not (np.all(np.isfinite(out_y)) and np.all(np.isfinite(out_pi))):
        raise NonFinitePath("limit path became non-finite; reduce dt")
    return out_pi.T, out_y.T


def _advance(params, scheme, normals, sample_idx, y, pi, out_y, out_pi, j):
    dt = scheme.dt
    sq = math.sqrt(dt)
    rho = params.rho
    rho_c = math.sqrt(max(0.0, 1.0 - rho * rho))
    fp = params.f_prime0
    quad = params.alpha_y * params.f_second0
    reflected = scheme.kind is SchemeKind.REFLECTED_EULER
    for k in range(scheme.n_steps):
        db = normals[k, 0] * sq
        dw = rho * db + rho_c * normals[k, 1] * sq
        yp = np.maximum(y, 0.0) if not reflected else y
        vol = np.sqrt(fp * yp)
        pi = pi + params.beta_pi * dt + params.sigma_pi * vol * dw
        y = y + (params.beta_y + params.theta_y * yp + quad * yp * yp) * dt + params.sigma_y * vol * db
        if reflected:
            y = np.abs(y)
        while j < sample_idx.size and sample_idx[j] == k + 1:
            out_y[j] = np.maximum(y, 0.0)
            out_pi[j] = pi
            j += 1


def simulate_sde_ensemble(
    params: LimitSdeParams,
    scheme: SdeScheme,
    seed: int,
    replicas: int,
    grid_points: int = 512,
    stream: int = 1,
    first_replica: int = 0,
) -> SdeEnsemble:
    """Simulate ``replicas`` limit paths sampled on ``grid_points + 1`` times.

    Replica ``r`` draws its Gaussian increments from its own PCG64 stream
    seeded by ``derive_seed(seed, r, stream)``, so results do not depend on
    the block size.  Full truncation evaluates the drift and diffusion at
    ``max(y, 0)`` and reports ``max(y, 0)``; the reflected scheme replaces
    ``y`` by ``|y|`` after every step.
    """
    if params.y0 < 0:
        raise ValueError("y0 must be nonnegative")
    if grid_points > scheme.n_steps:
        raise ConfigError(
            f"grid_points ({grid_points}) exceeds the number of SDE steps ({scheme.n_steps})", key="grid_points"
        )
    sample_idx = _sample_indices(scheme.n_steps, grid_points)
    grid = sample_idx * scheme.dt
    pis, ys = [], []
    for start in range(first_replica, first_replica + replicas, SDE_BLOCK):
        stop = min(start + SDE_BLOCK, first_replica + replicas)
        normals = np.empty((scheme.n_steps, 2, stop - start))
        for col, r in enumerate(range(start, stop)):
            gen = np.random.Generator(np.random.PCG64(derive_seed(seed, r, stream)))
            normals[:, :, col] = gen.standard_normal((scheme.n_steps, 2))
        p, y = _run_block(params, scheme, normals, sample_idx)
        pis.append(p)
        ys.append(y)
    return SdeEnsemble(grid, np.concatenate(pis), np.concatenate(ys))


def simulate_sde(params: LimitSdeParams, scheme: SdeScheme, seed: int, grid_points: int | None = None) -> MacroPath:
    """One limit path (``z`` is identically zero in the limit)."""
    grid_points = scheme.n_steps if grid_points is None else grid_points
    return simulate_sde_ensemble(params, scheme, seed, 1, grid_points).path(0)
