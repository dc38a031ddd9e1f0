"""Replica-parallel ensembles of rescaled paths."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import simulate_path
from .params import ModelConfig
from .rescale import MacroPath, to_macro
from .sde import SdeEnsemble
from .seeding import derive_seed

HAWKES_STREAM = 0


@dataclass(frozen=True)
class MacroEnsemble:
    """Rescaled observables of ``R`` replicas on a common grid.

    ``hit_index`` holds, per replica, the grid index of ``tau_h`` (the
    first grid point with ``Y > h``), or the grid length when ``Y`` never
    exceeds ``h``.
    """

    grid: np.ndarray
    pi: np.ndarray
    y: np.ndarray
    z: np.ndarray
    hit_index: np.ndarray
    h: float
    n_agents: int | None = None
    n_events: np.ndarray | None = None
    label: str = ""

    @property
    def replicas(self) -> int:
        return int(self.pi.shape[0])

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.grid - t)))

    def hit_fraction(self) -> float:
        return float(np.mean(self.hit_index < self.grid.shape[0]))

    def before_tau(self) -> np.ndarray:
        """Boolean mask ``(R, G)`` of grid points with ``t <= tau_h``."""
        idx = np.arange(self.grid.shape[0])
        return idx[None, :] <= self.hit_index[:, None]

    def path(self, r: int) -> MacroPath:
        n = self.grid.shape[0]
        hit = None if self.hit_index[r] >= n else float(self.grid[self.hit_index[r]])
        return MacroPath(self.grid, self.pi[r], self.y[r], self.z[r], tau_h_hit=hit, h=self.h)


def resolve_threads(threads: int | str | None) -> int:
    if threads in (None, "auto"):
        return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))
    n = int(threads)
    if n < 1:
        raise ValueError("threads must be a positive integer or 'auto'")
    return n


def _hit_index(macro: MacroPath, h: float) -> int:
    above = np.flatnonzero(macro.y > h)
    return int(above[0]) if above.size else macro.grid.shape[0]


def hawkes_ensemble(
    config: ModelConfig,
    replicas: int,
    h: float,
    *,
    seed: int | None = None,
    threads: int | str | None = 1,
    backend: str | None = None,
    keep_paths: bool = False,
) -> MacroEnsemble | tuple[MacroEnsemble, list]:
    """Simulate ``replicas`` Hawkes paths and rescale them.

    Replica ``r`` uses ``derive_seed(seed, r)``; results are assembled in
    replica order, so the output does not depend on ``threads``.
    """
    seed = config.seed if seed is None else seed
    n_threads = resolve_threads(threads)

    def one(r):
        rec = simulate_path(config, derive_seed(seed, r, HAWKES_STREAM), backend=backend)
        return rec, to_macro(rec)

    if n_threads == 1:
        results = [one(r) for r in range(replicas)]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(one, range(replicas)))
    macros = [m for _, m in results]
    ens = MacroEnsemble(
        grid=macros[0].grid,
        pi=np.stack([m.pi for m in macros]),
        y=np.stack([m.y for m in macros]),
        z=np.stack([m.z for m in macros]),
        hit_index=np.array([_hit_index(m, h) for m in macros], dtype=np.int64),
        h=float(h),
        n_agents=config.n_agents,
        n_events=np.array([rec.n_events for rec, _ in results], dtype=np.int64),
        label=f"hawkes N={config.n_agents}",
    )
    if keep_paths:
        return ens, [rec for rec, _ in results]
    return ens


def from_sde(sde: SdeEnsemble, h: float = np.inf) -> MacroEnsemble:
    n = sde.grid.shape[0]
    above = sde.y > h
    hit = np.where(above.any(axis=1), above.argmax(axis=1), n).astype(np.int64)
    return MacroEnsemble(sde.grid, sde.pi, sde.y, np.zeros_like(sde.y), hit, float(h), label="limit sde")
