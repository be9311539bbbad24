"""Run configuration as line-oriented ``key = value`` text."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# purpose tags for deriving independent seeds from the global one
GRAPH_SEED = 1
PLACEMENT_SEED = 2
ADVERSARY_SEED = 3
NOISE_SEED = 4
INIT_SEED = 6
REDUCED_SEED = 7
TRUTH_SEED = 9


def derive_seed(seed: int, purpose: int, *extra: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(purpose, *extra))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # graph
    n: int = 30
    F: int | None = 2  # None: smallest F that admits an F-local placement
    graph_file: str = ""
    graph_seed: int | None = None
    adversaries: int = 4
    placement_seed: int | None = None
    # adversaries
    strategy: str = "conflicting"
    strategy_params: str = "-10 10"
    cap: float = 1e6
    # costs
    stream: str = "sensor"
    true_x: float | None = None
    sigma: float = 1.0
    h_min: float = 0.1
    h_resample: bool = True
    K1: float = 100.0
    K2: float = 10.0
    synthetic_rho: float = 1.0
    synthetic_kink: float = 1.0
    step_rho: str = "mean"  # "min", "mean" or a number
    # run
    T: int = 1000
    tail: int = 300
    seed: int = 0
    filter: str = "literal"
    init: float = 10.0
    checkpoints: tuple = (100, 250, 500, 1000)
    safety_factor: float = 10.0
    reduced_budget: int = 200
    exhaustive_limit: int = 14
    force: bool = False
    out_dir: str = "out"
    write_matrices: bool = False
    write_rounds: bool = False
    plot: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.filter not in ("literal", "relative"):
            raise ConfigError(f"filter must be literal or relative, got {self.filter!r}")
        if self.stream not in ("sensor", "synthetic-quadratic", "synthetic-piecewise"):
            raise ConfigError(f"unknown stream {self.stream!r}")
        if self.T < 1 or self.tail < 2:
            raise ConfigError("need T >= 1 and tail >= 2")
        if self.F is not None and self.F < 0:
            raise ConfigError("F must be non-negative")
        if self.step_rho not in ("min", "mean"):
            try:
                if float(self.step_rho) <= 0:
                    raise ConfigError("step_rho must be positive")
            except ValueError:
                raise ConfigError(f"bad step_rho {self.step_rho!r}") from None

    def resolved_seed(self, purpose: int, explicit: int | None = None) -> int:
        return explicit if explicit is not None else derive_seed(self.seed, purpose)

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


PRESETS = {
    "desk": dict(n=30, F=2, adversaries=4, T=2000, checkpoints=(100, 250, 500, 1000, 2000)),
    "paper": dict(n=100, F=None, adversaries=15, T=1000),
    "smoke": dict(n=15, F=1, adversaries=2, T=200, tail=100, checkpoints=(50, 100, 200)),
}


def preset(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return RunConfig(**{**PRESETS[name], **overrides})


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _none_or(conv):
    def f(s: str):
        return None if s.strip().lower() in ("", "none", "auto") else conv(s)

    return f


def _int_tuple(s: str) -> tuple:
    return tuple(int(x) for x in s.replace(",", " ").split())


_CONVERTERS = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "int | None": _none_or(int),
    "float | None": _none_or(float),
    "tuple": _int_tuple,
}


def _fields():
    return {f.name: f for f in dataclasses.fields(RunConfig)}


def coerce(key: str, raw: str):
    fs = _fields()
    if key not in fs:
        raise ConfigError(f"unknown config key {key!r}")
    conv = _CONVERTERS[str(fs[key].type)]
    try:
        return conv(raw.strip())
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def parse_overrides(text: str, strict: bool = True) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    With ``strict=False`` unknown keys are skipped (used for manifests).
    """
    out = {}
    fs = _fields()
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in fs and not strict:
            continue
        out[key] = coerce(key, raw)
    return out


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    return base.replace(**parse_overrides(text))


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(), base)


def format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return " ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(config: RunConfig) -> str:
    return "".join(
        f"{f.name} = {format_value(getattr(config, f.name))}\n"
        for f in dataclasses.fields(RunConfig)
    )
