"""Macroscopic observables of a microscopic path.

With ``w^+, w^-`` the volatility weights of the population and
``gamma_bar`` its mean ``gamma``,

    Pi_N(t) = (N^+ - N^-)(sqrt(N) t) / sqrt(N)
    Y_N(t)  = sqrt(N) [w^+ m^+ + w^- m^-](sqrt(N) t)
    Z_N(t)  = (1 - gamma_bar) sqrt(N) / 2 * (m^+ - m^-)(sqrt(N) t)

For a homogeneous population ``w^+ = (1+beta gamma)/(1+beta)`` and
``w^- = beta w^+``; inhomogeneous populations use the finite-N averages
``gamma_bar`` and ``B = mean(beta gamma)`` through
``w^+ = gamma_bar (1+B)/(gamma_bar+B)``, ``w^- = B (1+B)/(gamma_bar+B)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .engine.records import HawkesPathRecord
from .params import Inhomogeneous, ModelConfig, population_average


@dataclass(frozen=True)
class ObservableWeights:
    w_plus: float
    w_minus: float
    z_coeff: float

    @property
    def z_bound(self) -> float:
        """Constant ``C`` with ``|Z_N| <= C Y_N`` for nonnegative memories."""
        return self.z_coeff / min(self.w_plus, self.w_minus)

    @property
    def matrix(self) -> np.ndarray:
        """Map ``(sqrt(N) m^+, sqrt(N) m^-) -> (Y, Z)``."""
        return np.array([[self.w_plus, self.w_minus], [self.z_coeff, -self.z_coeff]])


def observable_weights(config: ModelConfig) -> ObservableWeights:
    agents = config.agents
    if isinstance(agents, Inhomogeneous):
        g = population_average(agents, lambda b, c: c, config.n_agents)
        bg = population_average(agents, lambda b, c: b * c, config.n_agents)
        return ObservableWeights(g * (1.0 + bg) / (g + bg), bg * (1.0 + bg) / (g + bg), 0.5 * (1.0 - g))
    beta, gamma = agents.beta, agents.gamma
    w = (1.0 + beta * gamma) / (1.0 + beta)
    return ObservableWeights(w, beta * w, 0.5 * (1.0 - gamma))


def z_bound_constant(beta: float, gamma: float) -> float:
    """``C(beta, gamma) = (1-gamma)(1+beta) / (2(1+beta gamma)) * max(1, 1/beta)``."""
    return (1.0 - gamma) * (1.0 + beta) / (2.0 * (1.0 + beta * gamma)) * max(1.0, 1.0 / beta)


@dataclass(frozen=True)
class MacroPath:
    """Rescaled observables on the macroscopic grid.

    ``tau_h_hit`` is the first grid time with ``y > h`` once
    :func:`truncate_diag` has been applied with level ``h``.
    """

    grid: np.ndarray
    pi: np.ndarray
    y: np.ndarray
    z: np.ndarray
    tau_h_hit: float | None = None
    h: float | None = None

    def stop_index(self) -> int:
        """Number of grid points with ``t <= tau_h`` (all points when never hit)."""
        if self.tau_h_hit is None:
            return self.grid.shape[0]
        return int(np.searchsorted(self.grid, self.tau_h_hit, side="right"))

    def value_at(self, name: str, t: float) -> float:
        i = int(np.argmin(np.abs(self.grid - t)))
        return float(getattr(self, name)[i])


def to_macro(path: HawkesPathRecord) -> MacroPath:
    cfg = path.config
    root = math.sqrt(cfg.n_agents)
    w = observable_weights(cfg)
    sp = root * path.m_plus_path
    sm = root * path.m_minus_path
    pi = path.count_diff_path.astype(float) / root
    y = w.w_plus * sp + w.w_minus * sm
    z = w.z_coeff * (sp - sm)
    return MacroPath(grid=path.grid, pi=pi, y=y, z=z)


def truncate_diag(macro: MacroPath, h: float) -> MacroPath:
    """Mark the first grid time at which ``y`` exceeds ``h``.

    Paths are never modified; downstream statistics restrict themselves to
    ``t <= tau_h`` through :meth:`MacroPath.stop_index`.
    """
    if not h >= 0:
        raise ValueError(f"truncation level must be nonnegative, got {h}")
    above = np.flatnonzero(macro.y > h)
    hit = float(macro.grid[above[0]]) if above.size else None
    return replace(macro, tau_h_hit=hit, h=float(h))


def default_truncation_level(y0: float) -> float:
    return 10.0 * y0
