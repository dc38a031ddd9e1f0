"""Event logs and microscopic path records."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterator

import numpy as np

from ..params import ModelConfig

EVENT_DTYPE = np.dtype([("t", "<f8"), ("agent", "<u4"), ("sign", "u1")], align=False)


class Sign(IntEnum):
    BUY = 0
    SELL = 1


@dataclass(frozen=True)
class EventRecord:
    t_micro: float
    agent_id: int
    sign: Sign


@dataclass(frozen=True)
class EventLog:
    """Columnar event log; ``agent`` holds agent ids (0-based)."""

    t: np.ndarray
    agent: np.ndarray
    sign: np.ndarray

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def __iter__(self) -> Iterator[EventRecord]:
        for t, a, s in zip(self.t.tolist(), self.agent.tolist(), self.sign.tolist()):
            yield EventRecord(t, a, Sign(s))

    def __getitem__(self, i: int) -> EventRecord:
        return EventRecord(float(self.t[i]), int(self.agent[i]), Sign(int(self.sign[i])))

    def first_time(self, default: float = np.inf) -> float:
        return float(self.t[0]) if len(self) else default

    def to_bytes(self) -> bytes:
        """Little-endian dump: u64 count, then (f64 time, u32 agent, u8 sign) per event."""
        rec = np.empty(len(self), dtype=EVENT_DTYPE)
        rec["t"] = self.t
        rec["agent"] = self.agent
        rec["sign"] = self.sign
        return struct.pack("<Q", len(self)) + rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "EventLog":
        (n,) = struct.unpack_from("<Q", data, 0)
        rec = np.frombuffer(data, dtype=EVENT_DTYPE, count=n, offset=8)
        return cls(rec["t"].astype(float), rec["agent"].astype(np.uint32), rec["sign"].astype(np.uint8))

    def write(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path: str | Path) -> "EventLog":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True)
class HawkesPathRecord:
    """One microscopic realization sampled on the macroscopic grid.

    ``m_plus_path``/``m_minus_path`` and the counters hold left limits at the
    micro times ``sqrt(N) * grid``.  ``events`` is ``None`` unless events
    were requested and their number stayed within the log cap.
    """

    config: ModelConfig
    grid: np.ndarray
    m_plus_path: np.ndarray
    m_minus_path: np.ndarray
    count_plus_path: np.ndarray
    count_minus_path: np.ndarray
    n_events: int
    n_proposals: int
    n_candidates: int
    events: EventLog | None = None
    agent_x_plus: np.ndarray | None = None
    agent_x_minus: np.ndarray | None = None

    @property
    def count_diff_path(self) -> np.ndarray:
        return self.count_plus_path - self.count_minus_path

    @property
    def count_sum_path(self) -> np.ndarray:
        return self.count_plus_path + self.count_minus_path

    @property
    def acceptance_rate(self) -> float:
        return self.n_events / self.n_candidates if self.n_candidates else float("nan")
