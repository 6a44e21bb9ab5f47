"""Run configuration read from a TOML file.

Example::

    seed = 7
    out = "results"

    [inputs]
    A = "data/2001.csv"
    B = "data/2010.csv"

    [model]
    k_g = "auto"
    k_b = 2

    [chain]
    iterations = 12000
    burn_in = 2000

    [dominance]
    criteria = ["fsd_uni", "ssd_uni", "u1", "u2", "u3"]
    restricted = true

Relative paths are resolved against the directory of the config file.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dominance import CRITERIA, EvaluationGrid, PovertyLines, build_default_grid
from .errors import ParameterError
from .indices import DeprivationRule, NormalizationBenchmarks
from .sampler.types import ChainConfig, PriorConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["RunConfig", "load_config", "load_grid", "parse_lines", "parse_criteria"]


def _component_count(v):
    if v == "auto":
        return "auto"
    if isinstance(v, int) and v >= 1:
        return v
    raise ParameterError(f"component count must be a positive integer or 'auto', got {v!r}")


@dataclass
class RunConfig:
    inputs: dict = field(default_factory=dict)
    k_g: object = "auto"
    k_b: object = "auto"
    priors: PriorConfig = field(default_factory=PriorConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)
    grid: str = "default"
    lines: PovertyLines | None = None
    benchmarks: NormalizationBenchmarks = field(default_factory=NormalizationBenchmarks)
    deprivation: DeprivationRule = field(default_factory=DeprivationRule)
    criteria: tuple = CRITERIA
    restricted: bool = True
    out: str = "results"
    seed: int = 0
    max_k: int = 4
    holdout_fraction: float = 0.2
    tie_tol: float = 0.0
    selection_rule: str = "one_se"
    allow_drops: bool = False
    workers: int | None = None

    def __post_init__(self):
        self.k_g = _component_count(self.k_g)
        self.k_b = _component_count(self.k_b)
        self.criteria = parse_criteria(self.criteria)

    def check_inputs(self) -> None:
        if set(self.inputs) != {"A", "B"}:
            raise ParameterError("inputs must name exactly the populations A and B")
        for label, p in self.inputs.items():
            if not Path(p).is_file():
                raise ParameterError(f"input file for {label} not found: {p}")

    def evaluation_grid(self) -> EvaluationGrid:
        return load_grid(self.grid)

    def poverty_lines(self) -> PovertyLines:
        return self.lines or PovertyLines.default(self.evaluation_grid())

    def to_dict(self) -> dict:
        def conv(v):
            if dataclasses.is_dataclass(v):
                return {k: conv(x) for k, x in dataclasses.asdict(v).items()}
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            if isinstance(v, float) and not np.isfinite(v):
                return str(v)
            return v
        d = {f.name: conv(getattr(self, f.name)) for f in dataclasses.fields(self)}
        d["lines"] = conv(self.poverty_lines())
        return d


def parse_criteria(value) -> tuple:
    items = [c.strip() for c in value.split(",")] if isinstance(value, str) else list(value)
    items = [c for c in items if c]
    bad = [c for c in items if c not in CRITERIA]
    if bad:
        raise ParameterError(f"unknown criteria {bad}; choose from {CRITERIA}")
    if not items:
        raise ParameterError("no criteria requested")
    return tuple(dict.fromkeys(items))


def parse_lines(text: str, grid: EvaluationGrid | None = None) -> PovertyLines:
    """Parse ``"z1,z2,z3,z4"``; ``z1`` may be ``auto`` (grid point nearest 20,000)."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ParameterError("poverty lines need four comma-separated values")
    z1 = PovertyLines.default(grid).income if parts[0] == "auto" else float(parts[0])
    return PovertyLines(z1, float(parts[1]), int(parts[2]), int(parts[3]))


def load_grid(spec) -> EvaluationGrid:
    """The default grid, or a JSON file with ``income`` and ``health`` arrays."""
    if spec in (None, "default"):
        return build_default_grid()
    data = json.loads(Path(spec).read_text())
    base = build_default_grid()
    return EvaluationGrid(
        np.array(data.get("income", base.income), dtype=float),
        np.array(data.get("health", base.health), dtype=float),
        np.array(data.get("education", base.education)),
        np.array(data.get("happiness", base.happiness)),
    )


def _dataclass_from(cls, values: dict):
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(values) - names
    if unknown:
        raise ParameterError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    conv = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    return cls(**conv)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    base = path.parent

    def resolve(p):
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    cfg = RunConfig()
    known = {"seed", "out", "inputs", "model", "priors", "chain", "grid", "lines", "benchmarks",
             "deprivation", "dominance", "selection", "ingest"}
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config sections: {sorted(unknown)}")
    cfg.seed = int(raw.get("seed", cfg.seed))
    if "out" in raw:
        cfg.out = resolve(raw["out"])
    cfg.inputs = {k: resolve(v) for k, v in raw.get("inputs", {}).items()}
    model = raw.get("model", {})
    cfg.k_g = _component_count(model.get("k_g", cfg.k_g))
    cfg.k_b = _component_count(model.get("k_b", cfg.k_b))
    if "priors" in raw:
        cfg.priors = _dataclass_from(PriorConfig, raw["priors"])
    if "chain" in raw:
        cfg.chain = _dataclass_from(ChainConfig, raw["chain"])
    grid = raw.get("grid", "default")
    cfg.grid = grid if grid == "default" else resolve(grid)
    if "lines" in raw:
        ln = dict(raw["lines"])
        if ln.get("income", "auto") == "auto":
            ln["income"] = PovertyLines.default(load_grid(cfg.grid)).income
        cfg.lines = _dataclass_from(PovertyLines, ln)
    if "benchmarks" in raw:
        cfg.benchmarks = _dataclass_from(NormalizationBenchmarks, raw["benchmarks"])
    if "deprivation" in raw:
        cfg.deprivation = _dataclass_from(DeprivationRule, raw["deprivation"])
    dom = raw.get("dominance", {})
    cfg.criteria = parse_criteria(dom.get("criteria", cfg.criteria))
    cfg.restricted = bool(dom.get("restricted", cfg.restricted))
    cfg.workers = dom.get("workers", cfg.workers)
    sel = raw.get("selection", {})
    cfg.max_k = int(sel.get("max_k", cfg.max_k))
    cfg.holdout_fraction = float(sel.get("holdout_fraction", cfg.holdout_fraction))
    cfg.tie_tol = float(sel.get("tie_tol", cfg.tie_tol))
    cfg.selection_rule = str(sel.get("rule", cfg.selection_rule))
    cfg.allow_drops = bool(raw.get("ingest", {}).get("allow_drops", cfg.allow_drops))
    return cfg
