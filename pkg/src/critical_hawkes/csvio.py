"""CSV writers with a fixed schema and 17 significant digits."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable

from .analysis import EnsembleStats
from .rescale import MacroPath

PATH_HEADER = ("t", "pi", "y", "z")
ENSEMBLE_HEADER = ("t", "stat", "value", "stderr")
SUMMARY_HEADER = ("name", "value", "target", "band", "status")


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _render(header, rows: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def path_csv(macro: MacroPath) -> str:
    return _render(PATH_HEADER, zip(macro.grid, macro.pi, macro.y, macro.z))


def ensemble_csv(stats: EnsembleStats) -> str:
    return _render(ENSEMBLE_HEADER, stats.rows())


def summary_csv(results) -> str:
    return _render(
        SUMMARY_HEADER, ((r.name, r.value, r.target, r.band, "PASS" if r.passed else "FAIL") for r in results)
    )


def write_text(path: Path, text: str, overwrite: bool = False) -> Path:
    """Write ``text`` to ``path``; existing files need ``overwrite``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w" if overwrite else "x", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
