"""Model configuration, intensity family, criticality and limit coefficients.

The microscopic model has ``N`` agents placing buy (+) and sell (-) orders.
Each agent carries memory variables ``X_i^{+/-}`` that decay at rate
``alpha`` and jump by one on the agent's own orders; the empirical means
``m^{+/-}`` of these variables drive the order intensities

    lambda^+ = f(m^+ + beta*gamma*m^-)
    lambda^- = f(gamma*m^+ + (1 + (beta - 1)*gamma)*m^-)

through a concave saturating function ``f``.  At the critical memory rate
``alpha = f'(0)(1 + beta*gamma)`` the rescaled price converges to a
stochastic volatility model whose coefficients are computed by
:func:`limit_params`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Union

import numpy as np

from .errors import ConfigError, NonCriticalAlpha, UnsupportedIntensity

__all__ = [
    "IntensityKind",
    "IntensityFn",
    "ExternalSignal",
    "Homogeneous",
    "Inhomogeneous",
    "SelfExciting",
    "AgentLaw",
    "ModelConfig",
    "LimitSdeParams",
    "AgentGroup",
    "eval_intensity",
    "critical_alpha",
    "limit_params",
    "agent_groups",
    "largest_remainder_counts",
    "population_average",
    "DEFAULT_EVENT_BUDGET",
]

DEFAULT_EVENT_BUDGET = 500_000_000
ALPHA_REL_TOL = 1e-12


class IntensityKind(str, Enum):
    SATURATING_EXPONENTIAL = "saturating_exponential"
    LINEAR_REFERENCE = "linear"


@dataclass(frozen=True)
class IntensityFn:
    """Intensity function ``f``, extended by zero on the negative axis.

    ``SATURATING_EXPONENTIAL`` is ``p*s*(1 - exp(-x/s))``: concave, bounded
    by ``p*s``, with ``f'(0) = p`` and ``f''(0) = -p/s``.
    ``LINEAR_REFERENCE`` is ``p*max(x, 0)``; it has ``f''(0) = 0`` and is
    only usable by the simulation engine.
    """

    kind: IntensityKind = IntensityKind.SATURATING_EXPONENTIAL
    p: float = 1.0
    s: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", IntensityKind(self.kind))
        if not (self.p > 0 and math.isfinite(self.p)):
            raise ConfigError(f"intensity slope p must be positive and finite, got {self.p}", key="f.p")
        if self.kind is IntensityKind.SATURATING_EXPONENTIAL:
            if not (self.s > 0 and math.isfinite(self.s)):
                raise ConfigError(f"saturation scale s must be positive and finite, got {self.s}", key="f.s")

    @property
    def slope0(self) -> float:
        return self.p

    @property
    def curvature0(self) -> float:
        if self.kind is IntensityKind.SATURATING_EXPONENTIAL:
            return -self.p / self.s
        return 0.0

    @property
    def supremum(self) -> float:
        if self.kind is IntensityKind.SATURATING_EXPONENTIAL:
            return self.p * self.s
        return math.inf

    @property
    def in_limit_scope(self) -> bool:
        return self.kind is IntensityKind.SATURATING_EXPONENTIAL

    @property
    def kind_code(self) -> int:
        # Integer tag understood by the simulation kernels.
        return 0 if self.kind is IntensityKind.SATURATING_EXPONENTIAL else 1

    def __call__(self, x):
        return eval_intensity(self, x)


def eval_intensity(f: IntensityFn, x):
    """Evaluate ``f`` at ``x`` (scalar or array); zero for ``x < 0``."""
    if np.ndim(x) == 0:
        x = float(x)
        if not x > 0.0:
            return 0.0
        if f.kind is IntensityKind.SATURATING_EXPONENTIAL:
            return f.p * f.s * -math.expm1(-x / f.s)
        return f.p * x
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    if f.kind is IntensityKind.SATURATING_EXPONENTIAL:
        return f.p * f.s * -np.expm1(-x / f.s)
    return f.p * x


@dataclass(frozen=True)
class ExternalSignal:
    """Macroscopic external signal ``nu = a*delta_0 + b*dt`` for each side.

    The microscopic atom is ``a/sqrt(N)``.  The microscopic drift rate is
    ``b/N`` by default (``b_scaling="n"``): after the ``sqrt(N)`` time change
    this contributes exactly ``beta_y = w^+ b^+ + w^- b^-`` to the volatility
    drift.  ``b_scaling="sqrt_n"`` gives ``b/sqrt(N)`` for comparison runs.
    """

    a_plus: float = 1.0
    a_minus: float = 1.0
    b_plus: float = 1.0
    b_minus: float = 1.0
    b_scaling: str = "n"

    def __post_init__(self):
        for name in ("a_plus", "a_minus", "b_plus", "b_minus"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a nonnegative finite number, got {v}", key=name)
        if self.b_scaling not in ("n", "sqrt_n"):
            raise ConfigError(f"b_scaling must be 'n' or 'sqrt_n', got {self.b_scaling!r}", key="b_scaling")

    def micro(self, n_agents: int) -> tuple[float, float, float, float]:
        """Return ``(a_N^+, a_N^-, b_N^+, b_N^-)``."""
        root = math.sqrt(n_agents)
        b_div = float(n_agents) if self.b_scaling == "n" else root
        return (self.a_plus / root, self.a_minus / root, self.b_plus / b_div, self.b_minus / b_div)


def _check_beta_gamma(beta, gamma, where="agents"):
    if not (beta >= 1 and math.isfinite(beta)):
        raise ConfigError(f"beta must be >= 1, got {beta}", key=f"{where}.beta" if where != "agents" else "beta")
    if not (0 <= gamma <= 1):
        raise ConfigError(f"gamma must lie in [0, 1], got {gamma}", key=f"{where}.gamma" if where != "agents" else "gamma")


@dataclass(frozen=True)
class Homogeneous:
    beta: float = 2.0
    gamma: float = 0.5

    def __post_init__(self):
        _check_beta_gamma(self.beta, self.gamma)


@dataclass(frozen=True)
class Inhomogeneous:
    """Finite population law: atoms ``(beta_k, gamma_k, weight_k)``.

    Agents are assigned to atoms by largest-remainder rounding of
    ``weight_k * N``, agent ids running contiguously through the atoms.
    """

    atoms: tuple[tuple[float, float, float], ...] = ((2.0, 0.5, 1.0),)

    def __post_init__(self):
        atoms = tuple(tuple(float(v) for v in a) for a in self.atoms)
        if not atoms:
            raise ConfigError("at least one atom is required", key="atoms")
        for a in atoms:
            if len(a) != 3:
                raise ConfigError(f"atoms are (beta, gamma, weight) triples, got {a}", key="atoms")
            _check_beta_gamma(a[0], a[1], where="atoms")
            if not a[2] > 0:
                raise ConfigError(f"atom weights must be positive, got {a[2]}", key="atoms")
        total = sum(a[2] for a in atoms)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"atom weights must sum to 1, got {total}", key="atoms")
        object.__setattr__(self, "atoms", atoms)


@dataclass(frozen=True)
class SelfExciting:
    beta: float = 2.0
    gamma: float = 0.5
    kappa: float = 1.0

    def __post_init__(self):
        _check_beta_gamma(self.beta, self.gamma)
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise ConfigError(f"kappa must be nonnegative, got {self.kappa}", key="kappa")


AgentLaw = Union[Homogeneous, Inhomogeneous, SelfExciting]


@dataclass(frozen=True)
class AgentGroup:
    """Agents sharing one ``(beta, gamma)`` pair; ids ``offset .. offset+count-1``."""

    beta: float
    gamma: float
    count: int
    offset: int

    @property
    def plus_coeffs(self) -> tuple[float, float]:
        # lambda^+ argument: 1*m^+ + beta*gamma*m^-
        return 1.0, self.beta * self.gamma

    @property
    def minus_coeffs(self) -> tuple[float, float]:
        # lambda^- argument: gamma*m^+ + (1 + (beta-1)*gamma)*m^-
        return self.gamma, 1.0 + (self.beta - 1.0) * self.gamma


def largest_remainder_counts(weights, n: int) -> list[int]:
    """Integer counts summing to ``n`` proportional to ``weights``.

    Ties in the fractional remainders go to the lower index.
    """
    raw = [w * n for w in weights]
    counts = [int(math.floor(r)) for r in raw]
    short = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda k: (-(raw[k] - counts[k]), k))
    for k in order[:short]:
        counts[k] += 1
    return counts


def agent_groups(agents: AgentLaw, n_agents: int) -> list[AgentGroup]:
    """Population groups of the configured law (empty groups dropped)."""
    if isinstance(agents, Inhomogeneous):
        counts = largest_remainder_counts([a[2] for a in agents.atoms], n_agents)
        groups, offset = [], 0
        for (beta, gamma, _), c in zip(agents.atoms, counts):
            if c > 0:
                groups.append(AgentGroup(beta, gamma, c, offset))
            offset += c
        return groups
    return [AgentGroup(agents.beta, agents.gamma, n_agents, 0)]


def population_average(agents: AgentLaw, g: Callable[[float, float], float], n_agents: int | None = None) -> float:
    """Average of ``g(beta, gamma)`` over the population.

    With ``n_agents`` the finite-N empirical average is returned, otherwise
    the weight average of the law.
    """
    if isinstance(agents, Inhomogeneous):
        if n_agents is None:
            return math.fsum(w * g(b, c) for b, c, w in agents.atoms)
        return math.fsum(grp.count * g(grp.beta, grp.gamma) for grp in agent_groups(agents, n_agents)) / n_agents
    return g(agents.beta, agents.gamma)


def critical_alpha(intensity: IntensityFn, agents: AgentLaw, n_agents: int | None = None) -> float:
    """Critical memory rate ``f'(0) * (1 + mean(beta*gamma))``."""
    bg = population_average(agents, lambda b, c: b * c, n_agents)
    return intensity.slope0 * (1.0 + bg)


@dataclass(frozen=True)
class ModelConfig:
    """Full microscopic model configuration.

    ``horizon`` is the macroscopic horizon ``T``; the engine simulates on
    ``[0, sqrt(N) T]`` in microscopic time.  The grid has ``grid_points``
    intervals, i.e. ``grid_points + 1`` sampling times including ``t = 0``.
    """

    n_agents: int = 100
    intensity: IntensityFn = field(default_factory=IntensityFn)
    agents: AgentLaw = field(default_factory=Homogeneous)
    signal: ExternalSignal = field(default_factory=ExternalSignal)
    alpha_override: float | None = None
    horizon: float = 1.0
    grid_points: int = 512
    seed: int = 0
    event_budget: int = DEFAULT_EVENT_BUDGET
    event_log_cap: int = 1_000_000

    def __post_init__(self):
        if not (isinstance(self.n_agents, (int, np.integer)) and self.n_agents >= 1):
            raise ConfigError(f"n_agents must be a positive integer, got {self.n_agents!r}", key="n_agents")
        if self.alpha_override is not None and not (self.alpha_override > 0 and math.isfinite(self.alpha_override)):
            raise ConfigError(f"alpha must be positive, got {self.alpha_override}", key="alpha")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError(f"horizon must be positive, got {self.horizon}", key="horizon")
        if not (isinstance(self.grid_points, (int, np.integer)) and self.grid_points >= 1):
            raise ConfigError(f"grid_points must be a positive integer, got {self.grid_points!r}", key="grid_points")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}", key="seed")
        if self.event_budget < 1:
            raise ConfigError("event_budget must be positive", key="event_budget")
        if self.event_log_cap < 0:
            raise ConfigError("event_log_cap must be nonnegative", key="event_log_cap")
        object.__setattr__(self, "n_agents", int(self.n_agents))
        object.__setattr__(self, "grid_points", int(self.grid_points))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def variant(self) -> str:
        return {Homogeneous: "homogeneous", Inhomogeneous: "inhomogeneous", SelfExciting: "self_exciting"}[
            type(self.agents)
        ]

    @property
    def critical_alpha(self) -> float:
        return critical_alpha(self.intensity, self.agents, self.n_agents)

    @property
    def alpha(self) -> float:
        return self.alpha_override if self.alpha_override is not None else self.critical_alpha

    @property
    def is_critical(self) -> bool:
        crit = self.critical_alpha
        return abs(self.alpha - crit) <= ALPHA_REL_TOL * abs(crit)

    @property
    def micro_horizon(self) -> float:
        return math.sqrt(self.n_agents) * self.horizon

    @property
    def window(self) -> float:
        """Thinning lookahead window ``min(1/alpha, 0.1 sqrt(N) T)``."""
        return min(1.0 / self.alpha, 0.1 * self.micro_horizon)

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.grid_points + 1)

    def micro_grid(self) -> np.ndarray:
        g = self.grid() * math.sqrt(self.n_agents)
        g[-1] = self.micro_horizon
        return g

    def groups(self) -> list[AgentGroup]:
        return agent_groups(self.agents, self.n_agents)

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class LimitSdeParams:
    """Coefficients of the limit system

        d pi = beta_pi dt + sigma_pi sqrt(f'(0) y) dW
        d y  = (beta_y + theta_y y + alpha_y f''(0) y^2) dt + sigma_y sqrt(f'(0) y) dB
        d<B, W> = rho dt

    ``rho_shortcut``, ``alpha_y_shortcut`` and ``theta_y_shortcut`` hold the
    alternative closed forms discussed in :func:`limit_params`; they are
    informational and unused by the simulators.
    """

    beta_pi: float
    sigma_pi: float
    beta_y: float
    theta_y: float
    alpha_y: float
    sigma_y: float
    rho: float
    f_prime0: float
    f_second0: float
    pi0: float
    y0: float
    rho_shortcut: float = float("nan")
    alpha_y_shortcut: float = float("nan")
    theta_y_shortcut: float = float("nan")

    @property
    def quadratic_drift(self) -> float:
        """Coefficient of ``y^2`` in the volatility drift."""
        return self.alpha_y * self.f_second0

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def with_(self, **changes) -> "LimitSdeParams":
        return replace(self, **changes)


def _homogeneous_limit(f: IntensityFn, beta, gamma, sig: ExternalSignal, kappa=0.0) -> LimitSdeParams:
    bg = beta * gamma
    w_plus = (1.0 + bg) / (1.0 + beta)
    w_minus = beta * (1.0 + bg) / (1.0 + beta)
    amplification = (1.0 + bg) / (gamma * (1.0 + beta))
    rho = (1.0 - beta) / math.sqrt(2.0 * (1.0 + beta * beta))
    return LimitSdeParams(
        beta_pi=(1.0 - gamma) / (gamma * (1.0 + beta)) * (sig.b_plus - sig.b_minus),
        sigma_pi=math.sqrt(2.0) * amplification,
        beta_y=w_plus * sig.b_plus + w_minus * sig.b_minus,
        theta_y=f.slope0 * (1.0 + bg) * kappa,
        alpha_y=0.5 * (1.0 + bg),
        sigma_y=math.sqrt(1.0 + beta * beta) * (1.0 + bg) / (1.0 + beta),
        rho=rho,
        f_prime0=f.slope0,
        f_second0=f.curvature0,
        pi0=(1.0 - gamma) / (gamma * (1.0 + beta)) * (sig.a_plus - sig.a_minus),
        y0=w_plus * sig.a_plus + w_minus * sig.a_minus,
        rho_shortcut=(1.0 - beta * beta) * gamma / ((1.0 + bg) * math.sqrt(2.0 * (1.0 + beta * beta))),
        alpha_y_shortcut=0.5 * (1.0 + bg),
        theta_y_shortcut=f.slope0 * (1.0 + bg) / (1.0 + beta) * kappa,
    )


def _inhomogeneous_limit(f: IntensityFn, agents: Inhomogeneous, n_agents: int, sig: ExternalSignal) -> LimitSdeParams:
    g = population_average(agents, lambda b, c: c, n_agents)
    bg = population_average(agents, lambda b, c: b * c, n_agents)
    sq = population_average(agents, lambda b, c: (1.0 + b * c) ** 2, n_agents)
    denom = g + bg
    w_plus = g * (1.0 + bg) / denom
    w_minus = bg * (1.0 + bg) / denom
    return LimitSdeParams(
        beta_pi=(1.0 - g) / denom * (sig.b_plus - sig.b_minus),
        sigma_pi=math.sqrt(2.0) * (1.0 + bg) / denom,
        beta_y=w_plus * sig.b_plus + w_minus * sig.b_minus,
        theta_y=0.0,
        alpha_y=0.5 * sq / (1.0 + bg),
        sigma_y=math.sqrt(g * g + bg * bg) * (1.0 + bg) / denom,
        rho=(g - bg) / math.sqrt(2.0 * (g * g + bg * bg)),
        f_prime0=f.slope0,
        f_second0=f.curvature0,
        pi0=(1.0 - g) / denom * (sig.a_plus - sig.a_minus),
        y0=w_plus * sig.a_plus + w_minus * sig.a_minus,
        rho_shortcut=(g * g - bg * bg) / ((1.0 + bg) * math.sqrt(2.0 * (g * g + bg * bg))),
        alpha_y_shortcut=0.5 * g * sq / (denom * (1.0 + bg)),
        theta_y_shortcut=0.0,
    )


def limit_params(config: ModelConfig) -> LimitSdeParams:
    """Limit-SDE coefficients for a critical configuration.

    Homogeneous and self-exciting populations use the closed forms in
    ``(beta, gamma)``; inhomogeneous populations use the finite-N empirical
    averages of ``gamma``, ``beta*gamma`` and ``(1 + beta*gamma)^2``.

    Three coefficients come from the second-order generator expansion and
    differ from commonly quoted shortcuts:

    * ``rho = (1 - beta)/sqrt(2(1 + beta^2))``: the price martingale is the
      raw order-flow martingale times the amplification
      ``(1 + beta*gamma)/(gamma(1 + beta))``, and that factor multiplies the
      price/volatility covariation as well as the price variance.  Dropping
      it from the covariation gives ``rho_shortcut``.
    * inhomogeneous ``alpha_y = mean((1 + beta*gamma)^2) / (2(1 + mean(beta*gamma)))``,
      which reduces to the homogeneous ``(1 + beta*gamma)/2`` for one atom;
      ``alpha_y_shortcut`` carries an extra ``mean(gamma)/(mean(gamma) + mean(beta*gamma))``.
    * ``theta_y = f'(0)(1 + beta*gamma) kappa``: the first-order self-excitation
      term carries the full weight ``w^+ + w^- = 1 + beta*gamma`` of the
      volatility combination; ``theta_y_shortcut`` divides it by ``1 + beta``.
    """
    f = config.intensity
    if not f.in_limit_scope:
        raise UnsupportedIntensity(
            "limit coefficients need f''(0) < 0; the linear reference intensity is outside the scope of the scaling limit"
        )
    if not config.is_critical:
        raise NonCriticalAlpha(f"alpha = {config.alpha!r} differs from the critical value {config.critical_alpha!r}")
    agents = config.agents
    if isinstance(agents, Inhomogeneous):
        g = population_average(agents, lambda b, c: c, config.n_agents)
        if g <= 0.0:
            raise ConfigError("the limit needs mean(gamma) > 0 (no collapse of the imbalance mode otherwise)", key="atoms")
        return _inhomogeneous_limit(f, agents, config.n_agents, config.signal)
    if agents.gamma <= 0.0:
        raise ConfigError("the limit needs gamma > 0 (no collapse of the imbalance mode otherwise)", key="gamma")
    kappa = agents.kappa if isinstance(agents, SelfExciting) else 0.0
    return _homogeneous_limit(f, agents.beta, agents.gamma, config.signal, kappa)
