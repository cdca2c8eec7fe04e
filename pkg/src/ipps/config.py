"""Run configuration: ``key = value`` text, environment and command-line overrides."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field, fields
from typing import Mapping

from .errors import ConfigError
from .lattice import MAX_EXACT_SITES

__all__ = ["COMMANDS", "RunConfig", "parse_config", "emit_config", "apply_overrides",
           "env_overrides", "validate"]

COMMANDS = ("exact-verify", "mc-compare", "equilibrium", "continuum-table",
            "convergence-scan", "net-solve", "firework")
STOCHASTIC = ("mc-compare",)
EXACT = ("exact-verify", "mc-compare")


@dataclass
class RunConfig:
    """All knobs of a harness run.  List-valued fields are comma separated in text."""

    command: str = ""
    model: str = "bcrw"
    p: float = 1.0
    q: float = 1.0
    l: float = 3.0
    r: float = 3.0
    m: float = 0.5
    m_site: int = -1
    n_sites: int = 10
    initial: str = "alternating"
    times: list = field(default_factory=lambda: [0.1, 0.3, 0.5])
    n_max: int = 3
    points: list = field(default_factory=list)
    replicas: int = 100000
    seed: int | None = None
    alpha: float = 1.0
    beta: float = 1.0
    b: float = 1.0
    kernel: str = "a"
    eps: list = field(default_factory=lambda: [0.1, 0.05])
    region: str = "R"
    grid_h: float = 0.05
    grid_dt: float = 0.0125
    delta: float = 0.1
    horizon: float = 20.0
    net_u: float | None = None
    net_v: float | None = None
    tolerance: float | None = None
    out: str = "ipps-out"


_LISTS = {"times": float, "points": float, "eps": float}


def _convert(name: str, raw: str):
    raw = raw.strip()
    if name in _LISTS:
        if raw == "":
            return []
        try:
            return [_LISTS[name](x) for x in raw.split(",")]
        except ValueError:
            raise ConfigError(f"{name}: expected comma-separated numbers, got {raw!r}") from None
    f = {f.name: f for f in fields(RunConfig)}[name]
    typ = f.type
    if raw.lower() in ("", "none") and "None" in str(typ):
        return None
    try:
        if "int" in str(typ):
            v = int(raw, 0)
        elif "float" in str(typ):
            v = float(raw)
        else:
            v = raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {typ}") from None
    return v


def _assign(cfg: RunConfig, key: str, raw: str, origin: str):
    key = key.strip().replace("-", "_")
    names = {f.name for f in fields(RunConfig)}
    if key not in names:
        raise ConfigError(f"{origin}: unknown key {key!r}; valid keys: {', '.join(sorted(names))}")
    setattr(cfg, key, _convert(key, raw))


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment).  Unknown keys are errors."""
    cfg = dataclasses.replace(base) if base is not None else RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        k, v = line.split("=", 1)
        _assign(cfg, k, v, f"line {lineno}")
    return cfg


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, list):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config`."""
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(RunConfig))


def apply_overrides(cfg: RunConfig, pairs, origin: str = "--set") -> RunConfig:
    cfg = dataclasses.replace(cfg)
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"{origin}: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        _assign(cfg, k, v, origin)
    return cfg


def env_overrides(env: Mapping[str, str] | None = None) -> list[str]:
    """``IPPS_<KEY>=value`` variables as ``key=value`` items."""
    env = os.environ if env is None else env
    return [f"{k[5:].lower()}={v}" for k, v in sorted(env.items()) if k.startswith("IPPS_")]


def validate(cfg: RunConfig) -> RunConfig:
    """Field-level checks; raises :class:`ConfigError` with a diagnostic."""
    problems = []
    if not cfg.command:
        problems.append(f"command: missing (choose from {', '.join(COMMANDS)})")
    elif cfg.command not in COMMANDS:
        problems.append(f"command: {cfg.command!r} is not one of {', '.join(COMMANDS)}")
    if cfg.model not in ("bcrw", "arwpi"):
        problems.append("model: must be bcrw or arwpi")
    for name in ("p", "q", "l", "r", "m", "alpha", "beta", "b"):
        v = getattr(cfg, name)
        if not (v >= 0 and math.isfinite(v)):
            problems.append(f"{name}: must be finite and nonnegative")
    if cfg.n_sites < 1:
        problems.append("n_sites: must be positive")
    if cfg.command in EXACT and cfg.n_sites > MAX_EXACT_SITES:
        problems.append(f"n_sites: {cfg.n_sites} exceeds the exact-engine cap "
                        f"{MAX_EXACT_SITES}; use a smaller window or Monte Carlo estimators")
    if any(t < 0 for t in cfg.times) or not cfg.times:
        problems.append("times: need at least one nonnegative time")
    if cfg.n_max < 1:
        problems.append("n_max: must be at least 1")
    if cfg.replicas < 2:
        problems.append("replicas: need at least 2")
    if cfg.tolerance is not None and not cfg.tolerance > 0:
        problems.append("tolerance: must be positive")
    if cfg.command in STOCHASTIC and cfg.seed is None:
        problems.append("seed: required for stochastic commands")
    if cfg.seed is not None and not 0 <= cfg.seed < 2 ** 64:
        problems.append("seed: must be an unsigned 64-bit integer")
    if any(e <= 0 for e in cfg.eps):
        problems.append("eps: must be positive")
    if not cfg.horizon > 0:
        problems.append("horizon: must be positive")
    if cfg.delta <= 0:
        problems.append("delta: must be positive")
    if cfg.kernel not in ("a", "b", "c", "firework", "poisson"):
        problems.append("kernel: one of a, b, c, firework, poisson")
    if cfg.grid_h <= 0 or cfg.grid_dt <= 0:
        problems.append("grid_h, grid_dt: must be positive")
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    return cfg
