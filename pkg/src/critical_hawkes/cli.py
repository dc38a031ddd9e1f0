"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 a verification criterion
failed, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from . import __version__
from .analysis import ensemble_stats
from .config import LoadedConfig, load_config
from .csvio import ensemble_csv, fmt, path_csv, summary_csv, write_text
from .ensemble import from_sde, hawkes_ensemble, resolve_threads
from .errors import ConfigError, CriticalHawkesError
from .params import ModelConfig, limit_params
from .rescale import default_truncation_level
from .sde import (
    DEFAULT_LOG2_STEPS,
    SchemeKind,
    SdeScheme,
    classify_boundary,
    feller_constants,
    scale_integrals,
    simulate_sde_ensemble,
)

SEED_ENV = "CRITICAL_HAWKES_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_RUNTIME = 0, 1, 2, 3


class Command(str, Enum):
    SIM_HAWKES = "sim-hawkes"
    SIM_SDE = "sim-sde"
    PARAMS = "params"
    BOUNDARY = "boundary"
    VERIFY = "verify"


@dataclass(frozen=True)
class RunManifest:
    command: Command
    config: Path | None = None
    out: Path = Path("out")
    replicas: int = 100
    seed: int | None = None
    threads: int | str = 1
    n_ladder: tuple[int, ...] = (100, 1000, 10_000)
    overwrite: bool = False
    scheme: SchemeKind = SchemeKind.FULL_TRUNCATION_EULER
    log2_steps: int = DEFAULT_LOG2_STEPS
    backend: str | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _threads(text: str):
    if text == "auto":
        return text
    return _positive_int(text)


def _ladder(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if len(values) < 3 or any(v < 1 for v in values) or list(values) != sorted(set(values)):
        raise argparse.ArgumentTypeError("the ladder needs at least three increasing positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="critical-hawkes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, sim=True):
        p.add_argument("--config", type=Path, help="TOML model configuration (defaults apply when omitted)")
        if sim:
            p.add_argument("--out", type=Path, default=Path("out"))
            p.add_argument("--replicas", type=_positive_int, default=100)
            p.add_argument("--seed", type=_u64)
            p.add_argument("--threads", type=_threads, default=1)
            p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser(Command.SIM_HAWKES.value, help="simulate rescaled Hawkes paths")
    common(p)
    p.add_argument("--backend", choices=("compiled", "python"))
    p = sub.add_parser(Command.SIM_SDE.value, help="simulate the limit stochastic volatility model")
    common(p)
    p.add_argument("--scheme", choices=[k.value for k in SchemeKind], default=SchemeKind.FULL_TRUNCATION_EULER.value)
    p.add_argument("--log2-steps", type=_positive_int, default=DEFAULT_LOG2_STEPS)
    common(sub.add_parser(Command.PARAMS.value, help="print the limit coefficients"), sim=False)
    common(sub.add_parser(Command.BOUNDARY.value, help="classify the y = 0 boundary"), sim=False)
    p = sub.add_parser(Command.VERIFY.value, help="run the acceptance ladder")
    common(p)
    p.set_defaults(replicas=2000, threads="auto")
    p.add_argument("--n-ladder", type=_ladder, default=(100, 1000, 10_000))
    return parser


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    kw = dict(command=Command(args.command), config=args.config)
    for name in ("out", "replicas", "seed", "threads", "n_ladder", "overwrite", "log2_steps", "backend"):
        if hasattr(args, name):
            kw[name] = getattr(args, name)
    if hasattr(args, "scheme"):
        kw["scheme"] = SchemeKind(args.scheme)
    return RunManifest(**kw)


def _load(manifest: RunManifest) -> LoadedConfig:
    loaded = load_config(manifest.config) if manifest.config else LoadedConfig(ModelConfig())
    seed = manifest.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            seed = _u64(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError(f"{SEED_ENV} must be an unsigned 64-bit integer, got {env!r}") from None
    if seed is not None:
        loaded = LoadedConfig(loaded.model.with_(seed=seed), loaded.h)
    return loaded


def _h(loaded: LoadedConfig) -> float:
    if loaded.h is not None:
        return loaded.h
    return default_truncation_level(limit_params(loaded.model).y0)


def _write_ensemble(out: Path, ens, overwrite: bool, width: int):
    for r in range(ens.replicas):
        write_text(out / "paths" / f"path_{r:0{width}d}.csv", path_csv(ens.path(r)), overwrite)
    write_text(out / "ensemble.csv", ensemble_csv(ensemble_stats(ens)), overwrite)


def _sim_hawkes(m: RunManifest, loaded: LoadedConfig) -> int:
    ens = hawkes_ensemble(
        loaded.model, m.replicas, _h(loaded), threads=resolve_threads(m.threads), backend=m.backend
    )
    _write_ensemble(m.out, ens, m.overwrite, max(5, len(str(m.replicas - 1))))
    print(f"wrote {m.replicas} paths and ensemble.csv to {m.out}")
    return EXIT_OK


def _sim_sde(m: RunManifest, loaded: LoadedConfig) -> int:
    cfg = loaded.model
    params = limit_params(cfg)
    scheme = SdeScheme.for_horizon(cfg.horizon, m.scheme, 2**m.log2_steps)
    sde = simulate_sde_ensemble(params, scheme, cfg.seed, m.replicas, cfg.grid_points)
    _write_ensemble(m.out, from_sde(sde, _h(loaded)), m.overwrite, max(5, len(str(m.replicas - 1))))
    print(f"wrote {m.replicas} paths and ensemble.csv to {m.out}")
    return EXIT_OK


def _params(loaded: LoadedConfig) -> int:
    table = limit_params(loaded.model).as_dict()
    width = max(map(len, table))
    for k, v in table.items():
        print(f"{k:<{width}}  {fmt(v)}")
    return EXIT_OK


def _boundary(loaded: LoadedConfig) -> int:
    params = limit_params(loaded.model)
    a, b, c = feller_constants(params)
    print(f"a = {fmt(a)}\nb = {fmt(b)}\nc = {fmt(c)}")
    try:
        cls = classify_boundary(params)
        print(f"analytic: {cls.behavior.value} (attainable={cls.attainable})")
    except CriticalHawkesError as exc:
        print(f"analytic: not applicable ({exc})")
    v = scale_integrals(params)
    print(f"scale integral toward 0: {'divergent' if v.lower_divergent else 'convergent'} (value {fmt(v.lower_value)})")
    print(f"scale integral toward infinity: {'divergent' if v.upper_divergent else 'convergent'} (value {fmt(v.upper_value)})")
    print(f"numeric: {v.to_boundary_class().behavior.value}")
    return EXIT_OK


def _verify(m: RunManifest, loaded: LoadedConfig) -> int:
    from .verify import Verifier, VerifySettings

    settings = VerifySettings(
        base=loaded.model, replicas=m.replicas, ladder=m.n_ladder, seed=loaded.model.seed, threads=m.threads
    )
    results = []
    lines = []
    verifier = Verifier(settings)
    for label, fn in verifier.criteria():
        res = verifier.evaluate(label, fn)
        results.append(res)
        lines.append(res.line())
        lines += [f"    {d}" for d in res.details]
        print(res.line(), flush=True)
    write_text(m.out / "summary.csv", summary_csv(results), m.overwrite)
    write_text(m.out / "details.txt", "\n".join(lines) + "\n", m.overwrite)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def run(manifest: RunManifest) -> int:
    try:
        loaded = _load(manifest)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if manifest.command is Command.SIM_HAWKES:
            return _sim_hawkes(manifest, loaded)
        if manifest.command is Command.SIM_SDE:
            return _sim_sde(manifest, loaded)
        if manifest.command is Command.PARAMS:
            return _params(loaded)
        if manifest.command is Command.BOUNDARY:
            return _boundary(loaded)
        return _verify(manifest, loaded)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileExistsError as exc:
        print(f"error: {exc.filename} exists; pass --overwrite to replace it", file=sys.stderr)
        return EXIT_RUNTIME
    except (CriticalHawkesError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(manifest_from_args(args))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
