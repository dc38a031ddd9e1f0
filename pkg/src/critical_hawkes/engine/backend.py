"""Kernel backend selection.

The compiled extension is used when importable.  Setting the environment
variable ``CRITICAL_HAWKES_BACKEND`` to ``python`` forces the pure-Python
kernels; ``compiled`` makes a missing extension an import error.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pure

try:
    from . import _kernel as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_BACKENDS: dict[str, ModuleType] = {"python": _pure}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def _select(choice: str) -> str:
    choice = choice.strip().lower() or "auto"
    if choice == "auto":
        return "compiled" if _compiled is not None else "python"
    if choice not in ("compiled", "python"):
        raise ImportError(f"CRITICAL_HAWKES_BACKEND must be auto, compiled or python, got {choice!r}")
    if choice == "compiled" and _compiled is None:
        raise ImportError("the compiled kernel extension is not built; run `pip install -e .`")
    return choice


DEFAULT_BACKEND = _select(os.environ.get("CRITICAL_HAWKES_BACKEND", "auto"))


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_kernels(name: str | None = None) -> ModuleType:
    name = DEFAULT_BACKEND if name is None else name
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available (have {available_backends()})") from None
