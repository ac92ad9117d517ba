"""Experiment configuration: parsing, validation, canonical hashing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .gauges import GaugeError, GaugeSpec
from .nets import DEFAULT_NET_CAP, estimate_line_net_size

KINDS = ("build", "lines", "convex", "tubes", "fibers", "report")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    kind: str
    dimension: int
    gauge: GaugeSpec
    n_max: int
    seed: int
    out: str
    params: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def canonical(self) -> dict:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "gauge": self.gauge.describe(),
            "n_max": self.n_max,
            "seed": self.seed,
            "params": self.params,
        }

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _require(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{field_name}: {message}")


def validate_config(raw: str, source: str = "<config>") -> ExperimentConfig:
    """Parse TOML or JSON text into a validated ExperimentConfig."""
    text = raw.strip()
    if not text:
        raise ConfigError("config: empty document")
    if text.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config: JSON parse error in {source}: {err}") from err
    else:
        try:
            data = tomllib.loads(raw)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"config: TOML parse error in {source}: {err}") from err
    return validate_config_dict(data)


def validate_config_dict(data: dict) -> ExperimentConfig:
    kind = data.get("kind")
    _require(kind in KINDS, "kind", f"must be one of {KINDS}, got {kind!r}")

    if kind == "report":
        run_dir = data.get("run_dir") or data.get("out")
        _require(bool(run_dir), "run_dir", "report needs the run directory")
        gauge = GaugeSpec.power(1.0, 2)
        return ExperimentConfig(
            kind="report", dimension=2, gauge=gauge, n_max=0,
            seed=int(data.get("seed", 0)), out=str(run_dir),
            params={"run_dir": str(run_dir)},
        )

    dimension = data.get("dimension", 2)
    _require(isinstance(dimension, int) and dimension >= 2, "dimension",
             f"must be an integer >= 2, got {dimension!r}")
    _require(dimension <= 3, "dimension", "simulation supports d in {2, 3}")

    n_max = data.get("n_max", 10)
    _require(isinstance(n_max, int) and 0 <= n_max, "n_max", f"must be >= 0, got {n_max!r}")
    max_depth = 24 if dimension == 2 else 20
    _require(n_max <= max_depth, "n_max", f"must be <= {max_depth} for d={dimension}")

    seed = data.get("seed", 1)
    _require(isinstance(seed, int) and 0 <= seed < 2**63, "seed", "must be a 63-bit integer")

    gauge_cfg = data.get("gauge")
    _require(isinstance(gauge_cfg, dict), "gauge", "missing [gauge] section")
    try:
        gauge = GaugeSpec.from_config(gauge_cfg, dimension)
    except (GaugeError, KeyError, TypeError) as err:
        raise ConfigError(f"gauge: {err}") from err

    out = str(data.get("out", "runs/run"))
    cfg = ExperimentConfig(
        kind=kind, dimension=dimension, gauge=gauge, n_max=n_max, seed=seed, out=out
    )
    cfg.params = _validate_kind_params(kind, data.get(kind, {}), cfg)
    return cfg


def _validate_kind_params(kind: str, params: dict, cfg: ExperimentConfig) -> dict:
    _require(isinstance(params, dict), kind, "parameter section must be a table")
    out = dict(params)
    if kind == "build":
        return out
    if kind == "lines":
        _require(cfg.dimension == 2, "dimension", "line nets are planar (d = 2)")
        level = out.setdefault("net_level", min(2, cfg.n_max))
        _require(isinstance(level, int) and 0 <= level <= 8, "lines.net_level",
                 f"must be in [0, 8], got {level!r}")
        _require(level <= cfg.n_max, "lines.net_level", "exceeds n_max")
        c0 = float(out.setdefault("c0", 1024.0))
        _require(c0 > 0, "lines.c0", "must be positive")
        est = estimate_line_net_size(level, c0)
        if est > DEFAULT_NET_CAP:
            cfg.warnings.append(
                f"lines: net at level {level} with c0={c0} holds ~{est:.3g} members, "
                f"over the cap {DEFAULT_NET_CAP:g}; the run will refuse"
            )
        out.setdefault("c_net", 2.0)
        out.setdefault("probes", 200)
        out.setdefault("trials", 2000)
        out.setdefault("probe_theta", 0.9273)
        out.setdefault("probe_rho", 0.3)
        levels = out.setdefault("martingale_levels", [max(cfg.n_max - 1, 0)])
        _require(
            all(isinstance(n, int) and 0 <= n < cfg.n_max for n in levels),
            "lines.martingale_levels", "levels must satisfy 0 <= n < n_max",
        )
        out.setdefault("kappas", [0.25 * k for k in range(1, 17)])
        return out
    if kind == "convex":
        ns = out.setdefault("n_values", [5, 10, 20, 40])
        _require(
            all(isinstance(n, int) and 2 <= n <= 100 for n in ns),
            "convex.n_values", "resolutions must be integers in [2, 100]",
        )
        ensemble = out.setdefault("ensemble", 200)
        _require(isinstance(ensemble, int) and ensemble >= 1, "convex.ensemble", "must be >= 1")
        return out
    if kind == "tubes":
        _require(cfg.dimension == 2, "dimension", "tube reports are planar (d = 2)")
        directions = out.setdefault("directions", 90)
        _require(isinstance(directions, int) and 1 <= directions <= 3600,
                 "tubes.directions", "must be in [1, 3600]")
        w = float(out.setdefault("bin_width", 2.0**-8))
        _require(2.0**-24 <= w <= 4.0, "tubes.bin_width", "must lie in [2^-24, 4]")
        out.setdefault("covers", 3)
        out.setdefault("cover_tubes", 12)
        out.setdefault("stability_levels", sorted({max(cfg.n_max - 2, 0), cfg.n_max}))
        return out
    if kind == "fibers":
        _require(cfg.dimension == 2, "dimension", "fiber reports are planar (d = 2)")
        out.setdefault("lines", 50)
        exps = out.setdefault("r_exponents", list(range(2, min(cfg.n_max, 12) + 1)))
        _require(
            all(isinstance(e, int) and 0 <= e <= 24 for e in exps),
            "fibers.r_exponents", "exponents must be integers in [0, 24]",
        )
        return out
    raise ConfigError(f"kind: unhandled experiment kind {kind!r}")


def format_float(x: float) -> str:
    """Deterministic, compact float formatting for CSV bodies."""
    if x == math.floor(x) and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.12g}"
