"""``key = value`` experiment configuration files."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional

from .harness import SweepConfig

SEED_ENV = "HOLOWAVE_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    sweep: SweepConfig
    out_dir: Optional[str] = None
    source: Optional[str] = None


def parse_text(text: str) -> dict[str, str]:
    """Lines of ``key = value``; ``#`` starts a comment; later keys win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def _float(key, v):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _int(key, v):
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None


def _rule(key, v, kinds):
    """``name:value`` or a bare number for the first kind."""
    if ":" in v:
        name, val = (s.strip() for s in v.split(":", 1))
    else:
        name, val = kinds[0], v
    if name not in kinds:
        raise ConfigError(f"{key}: unknown rule {name!r} (expected one of {', '.join(kinds)})")
    return name, val


def build(values: Mapping[str, str], base: Optional[SweepConfig] = None, env: Optional[Mapping[str, str]] = None) -> RunConfig:
    cfg = base or SweepConfig()
    sweep_kw: dict = {}
    prof_kw: dict = {}
    out_dir = None
    for key, v in values.items():
        if key == "eps_list":
            sweep_kw["eps_values"] = tuple(_float(key, s) for s in v.replace(",", " ").split())
        elif key == "t_slow":
            sweep_kw["T_slow"] = _float(key, v)
        elif key in ("profile.kind", "profile"):
            prof_kw["kind"] = v
        elif key in ("profile.amplitude", "profile.width", "profile.s"):
            prof_kw[key.split(".")[1]] = _float(key, v)
        elif key == "profile.seed":
            prof_kw["seed"] = _int(key, v)
        elif key == "c_trunc":
            sweep_kw["c_trunc"] = _float(key, v)
        elif key == "lambda":
            sweep_kw["lam"] = _float(key, v)
        elif key == "n_rule":
            name, val = _rule(key, v, ("kmax", "points"))
            if name == "kmax":
                sweep_kw["wave_kmax"] = _float(key, val)
                sweep_kw["wave_points"] = None
            else:
                sweep_kw["wave_points"] = _int(key, val)
        elif key == "dt_rule":
            _, val = _rule(key, v, ("factor",))
            sweep_kw["dt_factor"] = _float(key, val)
        elif key in ("slow_points", "n_checkpoints", "seed", "jobs"):
            sweep_kw[key] = _int(key, v)
        elif key == "sobolev_index":
            sweep_kw["N_sobolev"] = _int(key, v)
        elif key in ("slow_length_factor", "nls_dt"):
            sweep_kw[key] = _float(key, v)
        elif key == "out_dir":
            out_dir = v
        else:
            raise ConfigError(f"unknown config key {key!r}")
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        sweep_kw["seed"] = _int(SEED_ENV, env[SEED_ENV])
    try:
        if prof_kw:
            sweep_kw["profile"] = replace(cfg.profile, **prof_kw)
        return RunConfig(replace(cfg, **sweep_kw), out_dir)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load(path, env: Optional[Mapping[str, str]] = None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    rc = build(parse_text(p.read_text()), env=env)
    return replace(rc, source=str(p))


def dump(cfg: SweepConfig, out_dir: Optional[str] = None) -> str:
    """Canonical text form, readable by :func:`load`."""
    lines = [
        "eps_list = " + ", ".join(repr(e) for e in cfg.eps_values),
        f"t_slow = {cfg.T_slow!r}",
        f"profile.kind = {cfg.profile.kind}",
        f"profile.amplitude = {cfg.profile.amplitude!r}",
        f"profile.width = {cfg.profile.width!r}",
        f"profile.s = {cfg.profile.s!r}",
        f"profile.seed = {cfg.profile.seed}",
        f"c_trunc = {cfg.c_trunc!r}",
        f"lambda = {cfg.lam!r}",
        f"n_rule = points:{cfg.wave_points}" if cfg.wave_points else f"n_rule = kmax:{cfg.wave_kmax!r}",
        f"dt_rule = factor:{cfg.dt_factor!r}",
        f"slow_points = {cfg.slow_points}",
        f"slow_length_factor = {cfg.slow_length_factor!r}",
        f"nls_dt = {cfg.nls_dt!r}",
        f"n_checkpoints = {cfg.n_checkpoints}",
        f"sobolev_index = {cfg.N_sobolev}",
        f"seed = {cfg.seed}",
    ]
    if out_dir:
        lines.append(f"out_dir = {out_dir}")
    return "\n".join(lines) + "\n"


def resolve_seed(default: int, env: Optional[Mapping[str, str]] = None) -> int:
    env = os.environ if env is None else env
    v = env.get(SEED_ENV)
    return _int(SEED_ENV, v) if v else default


__all__ = ["ConfigError", "RunConfig", "SEED_ENV", "build", "dump", "load", "parse_text", "resolve_seed"]
