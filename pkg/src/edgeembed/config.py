"""Run configuration: defaults, flat ``key=value`` files and validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .embedder import PenaltySchedule, TrainConfig
from .walks import WalkConfig

OUTPUT_ENV = "EDGEEMBED_OUTPUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    edges: str | None = None
    labels: str | None = None
    out: str | None = None
    weighted: bool = False
    dim: int = 8
    alpha: float = 0.1
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 10
    p: float = 1.0
    q: float = 1.0
    epochs: int = 20
    negatives: int = 5
    lr_start: float = 0.025
    lr_end: float = 0.0001
    seed: int = 0
    workers: int = 1
    max_precomputed_arcs: int = 50_000_000
    context_in_normalizer: bool = True
    lam0: float = 0.1
    gamma0: float = 1.0
    lam_growth: float = 1.5
    gamma_growth: float = 2.0
    lam_max: float = 1e4
    gamma_max: float = 1e4
    tol: float = 1e-3
    dump_corpus: bool = False
    eval_edge_clustering: bool = True
    eval_edge_classification: bool = True
    eval_node_clustering: bool = True
    eval_centrality: bool = True
    train_fraction: float = 0.10
    restarts: int = 10
    dump_confusion: bool = False

    def output_dir(self) -> Path:
        out = self.out or os.environ.get(OUTPUT_ENV)
        if not out:
            raise ConfigError(f"no output directory: pass --out or set {OUTPUT_ENV}")
        return Path(out)

    def validate(self) -> None:
        positive_int = ("dim", "walks_per_node", "walk_length", "window", "epochs",
                        "negatives", "workers", "restarts", "max_precomputed_arcs")
        for name in positive_int:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.dim < 2:
            raise ConfigError("dim must be at least 2")
        positive = ("alpha", "p", "q", "lr_start", "lam0", "gamma0", "lam_max", "gamma_max", "tol")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.lr_end < 0 or self.lr_end > self.lr_start:
            raise ConfigError("lr_end must lie in [0, lr_start]")
        if self.lam_growth < 1 or self.gamma_growth < 1:
            raise ConfigError("penalty growth factors must be >= 1")
        if self.walk_length > 1 and self.window > self.walk_length - 1:
            raise ConfigError("window must not exceed walk_length - 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")

    def walk_config(self) -> WalkConfig:
        return WalkConfig(self.walks_per_node, self.walk_length, self.p, self.q, self.window,
                          self.seed, self.workers, self.max_precomputed_arcs)

    def train_config(self) -> TrainConfig:
        sched = PenaltySchedule(self.lam0, self.gamma0, self.lam_growth, self.gamma_growth,
                                self.lam_max, self.gamma_max, self.tol)
        return TrainConfig(self.dim, self.alpha, self.epochs, self.negatives, self.lr_start,
                           self.lr_end, self.window, self.seed, self.context_in_normalizer, sched)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name}={_format(v)}")
        return "\n".join(lines) + "\n"


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(name: str, raw: str, kind):
    raw = raw.strip()
    if kind is bool or kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def field_types() -> dict[str, str]:
    out = {}
    for f in fields(RunConfig):
        t = str(f.type)
        out[f.name] = "bool" if "bool" in t else "int" if t == "int" else "float" if t == "float" else "str"
    return out


def read_config_file(path) -> dict:
    """Parse a flat ``key=value`` file; ``#`` starts a comment line."""
    types = field_types()
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse(key, val, types[key])
    return values


def resolve(file_values: dict | None = None, cli_values: dict | None = None) -> RunConfig:
    """Merge with precedence CLI > file > defaults, then validate."""
    cfg = RunConfig()
    for src in (file_values or {}, cli_values or {}):
        for k, v in src.items():
            if v is not None:
                setattr(cfg, k, v)
    cfg.validate()
    return cfg
