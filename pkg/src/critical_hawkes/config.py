"""Flat, typed TOML configuration files.

Keys are flat names (dotted for the intensity function)::

    variant = "homogeneous"        # or "inhomogeneous", "self_exciting"
    n_agents = 1000
    beta = 2.0
    gamma = 0.5
    kappa = 1.0                    # self_exciting only
    atoms = [[2.0, 0.5, 1.0]]      # inhomogeneous only: (beta, gamma, weight)
    f.kind = "saturating_exponential"   # or "linear"
    f.p = 1.0
    f.s = 1.0
    a_plus = 1.0
    a_minus = 1.0
    b_plus = 1.0
    b_minus = 1.0
    b_scaling = "n"                # or "sqrt_n"
    alpha = 2.0                    # optional override of the critical rate
    horizon = 1.0
    grid_points = 512
    seed = 0
    event_budget = 500000000
    event_log_cap = 1000000
    h = 20.0                       # optional truncation level, default 10*y(0)

Every key is optional.  Unknown keys, keys that do not apply to the chosen
variant and values of the wrong type raise :class:`ConfigError` carrying
the key path and its line.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .params import (
    ExternalSignal,
    Homogeneous,
    Inhomogeneous,
    IntensityFn,
    IntensityKind,
    ModelConfig,
    SelfExciting,
)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

VARIANTS = ("homogeneous", "inhomogeneous", "self_exciting")

_FLOAT, _INT, _STR, _ATOMS = "float", "int", "str", "atoms"
SCHEMA = {
    "variant": _STR,
    "n_agents": _INT,
    "beta": _FLOAT,
    "gamma": _FLOAT,
    "kappa": _FLOAT,
    "atoms": _ATOMS,
    "f.kind": _STR,
    "f.p": _FLOAT,
    "f.s": _FLOAT,
    "a_plus": _FLOAT,
    "a_minus": _FLOAT,
    "b_plus": _FLOAT,
    "b_minus": _FLOAT,
    "b_scaling": _STR,
    "alpha": _FLOAT,
    "horizon": _FLOAT,
    "grid_points": _INT,
    "seed": _INT,
    "event_budget": _INT,
    "event_log_cap": _INT,
    "h": _FLOAT,
}
_VARIANT_KEYS = {
    "homogeneous": {"beta", "gamma"},
    "self_exciting": {"beta", "gamma", "kappa"},
    "inhomogeneous": {"atoms"},
}


@dataclass(frozen=True)
class LoadedConfig:
    model: ModelConfig
    h: float | None = None


def _flatten(table: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in table.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


_HEADER = re.compile(r"^\s*\[\s*([^\[\]]+?)\s*\]\s*(#.*)?$")
_ASSIGN = re.compile(r"^\s*([A-Za-z0-9_\-\.\"' ]+?)\s*=")


def _key_lines(text: str) -> dict[str, int]:
    """First line (1-based) on which each flat key is assigned."""
    lines: dict[str, int] = {}
    table = ""
    for i, raw in enumerate(text.splitlines(), start=1):
        m = _HEADER.match(raw)
        if m:
            table = re.sub(r"[\s\"']", "", m.group(1)) + "."
            lines.setdefault(table[:-1], i)
            continue
        m = _ASSIGN.match(raw)
        if m:
            key = table + re.sub(r"[\s\"']", "", m.group(1))
            lines.setdefault(key, i)
    return lines


def _check_type(key: str, value, kind: str, line):
    if kind == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {type(value).__name__}", key=key, line=line)
        return float(value)
    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {type(value).__name__}", key=key, line=line)
        return value
    if kind == _STR:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {type(value).__name__}", key=key, line=line)
        return value
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty array of [beta, gamma, weight] triples", key=key, line=line)
    atoms = []
    for atom in value:
        if (
            not isinstance(atom, list)
            or len(atom) != 3
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in atom)
        ):
            raise ConfigError("each atom must be a numeric [beta, gamma, weight] triple", key=key, line=line)
        atoms.append(tuple(float(x) for x in atom))
    return tuple(atoms)


def parse_config(text: str) -> LoadedConfig:
    """Parse configuration text; see the module docstring for the schema."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed configuration: {exc}", line=int(m.group(1)) if m else None) from None
    flat = _flatten(raw)
    lines = _key_lines(text)
    values = {}
    for key, value in flat.items():
        if key not in SCHEMA:
            raise ConfigError("unknown key", key=key, line=lines.get(key))
        values[key] = _check_type(key, value, SCHEMA[key], lines.get(key))

    variant = values.get("variant", "homogeneous")
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}", key="variant", line=lines.get("variant"))
    for key in set().union(*_VARIANT_KEYS.values()) - _VARIANT_KEYS[variant]:
        if key in values:
            raise ConfigError(f"key does not apply to variant {variant!r}", key=key, line=lines.get(key))

    try:
        kind = values.get("f.kind", IntensityKind.SATURATING_EXPONENTIAL.value)
        try:
            kind = IntensityKind(kind)
        except ValueError:
            raise ConfigError(
                f"f.kind must be one of {', '.join(k.value for k in IntensityKind)}", key="f.kind"
            ) from None
        intensity = IntensityFn(kind, values.get("f.p", 1.0), values.get("f.s", 1.0))
        if variant == "homogeneous":
            agents = Homogeneous(values.get("beta", 2.0), values.get("gamma", 0.5))
        elif variant == "self_exciting":
            agents = SelfExciting(values.get("beta", 2.0), values.get("gamma", 0.5), values.get("kappa", 1.0))
        else:
            agents = Inhomogeneous(values.get("atoms", ((2.0, 0.5, 1.0),)))
        signal = ExternalSignal(
            values.get("a_plus", 1.0),
            values.get("a_minus", 1.0),
            values.get("b_plus", 1.0),
            values.get("b_minus", 1.0),
            values.get("b_scaling", "n"),
        )
        model_kwargs = {
            k: values[k] for k in ("n_agents", "horizon", "grid_points", "seed", "event_budget", "event_log_cap") if k in values
        }
        model = ModelConfig(
            intensity=intensity, agents=agents, signal=signal, alpha_override=values.get("alpha"), **model_kwargs
        )
        h = values.get("h")
        if h is not None and not (h > 0 and math.isfinite(h)):
            raise ConfigError("truncation level must be positive", key="h")
    except ConfigError as exc:
        if exc.line is not None or exc.key is None:
            raise
        key = exc.key if exc.key in lines else exc.key.split(".")[0]
        msg = str(exc).rsplit(" (key", 1)[0]
        raise ConfigError(msg, key=exc.key, line=lines.get(key)) from None
    return LoadedConfig(model, h)


def load_config(path: str | Path) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _fmt(v) -> str:
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(model: ModelConfig, h: float | None = None) -> str:
    """Serialize ``model`` to text that :func:`parse_config` reads back exactly."""
    out = [f"variant = {_fmt(model.variant)}", f"n_agents = {model.n_agents}"]
    ag = model.agents
    if isinstance(ag, Inhomogeneous):
        atoms = ", ".join(f"[{b!r}, {g!r}, {w!r}]" for b, g, w in ag.atoms)
        out.append(f"atoms = [{atoms}]")
    else:
        out += [f"beta = {float(ag.beta)!r}", f"gamma = {float(ag.gamma)!r}"]
        if isinstance(ag, SelfExciting):
            out.append(f"kappa = {float(ag.kappa)!r}")
    f = model.intensity
    out += [f"f.kind = {_fmt(f.kind.value)}", f"f.p = {float(f.p)!r}", f"f.s = {float(f.s)!r}"]
    sig = model.signal
    for name in ("a_plus", "a_minus", "b_plus", "b_minus"):
        out.append(f"{name} = {float(getattr(sig, name))!r}")
    out.append(f"b_scaling = {_fmt(sig.b_scaling)}")
    if model.alpha_override is not None:
        out.append(f"alpha = {float(model.alpha_override)!r}")
    out += [
        f"horizon = {float(model.horizon)!r}",
        f"grid_points = {model.grid_points}",
        f"seed = {model.seed}",
        f"event_budget = {model.event_budget}",
        f"event_log_cap = {model.event_log_cap}",
    ]
    if h is not None:
        out.append(f"h = {float(h)!r}")
    return "\n".join(out) + "\n"
