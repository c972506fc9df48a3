"""Run configuration: loading, validation and hashing.

A configuration is one JSON or YAML document::

    dimension: 2
    seed: 42
    metric:
      catalog: euclid_const_b        # or: base: "<expr>", form: ["<expr>", ...]
    sample:
      count: 100
      x_box: [[-1, 1], [-1, 1]]      # optional, defaults to the instance box
      y_scale: [0.5, 2.0]
    checks: [eq12_star_metric, prop4_A]   # optional; omitted means the default suite
    theorems: [theorem1]                  # optional
    verify_tags: false                    # optional
    tolerances: {prop4_A: 1.0e-9}         # optional per-check overrides
    geodesic: {x0: [0, 0], y0: [1, 0], t_end: 1.0, rtol: 1.0e-9}   # optional
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .catalog import CATALOG, TAGS, CatalogEntry
from .expr import ExprError, parse_expression
from .geometry import MAX_DIM
from .verify import DEFAULT_SUITE, REGISTRY, THEOREMS, SamplePlan


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class GeodesicJob:
    x0: tuple[float, ...]
    y0: tuple[float, ...]
    t_end: float = 1.0
    rtol: float = 1e-9


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    seed: int
    entry: CatalogEntry
    sample: SamplePlan
    checks: tuple[str, ...]
    theorems: tuple[str, ...] = ()
    verify_tags: bool = False
    tolerances: dict[str, float] = field(default_factory=dict)
    geodesic: GeodesicJob | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _require(doc: dict, key: str, prefix: str = ""):
    if key not in doc or doc[key] is None:
        raise ConfigError(prefix + key, f"{key} required")
    return doc[key]


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    return value


def _vector(value: Any, name: str, n: int) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(name, f"expected a list of {n} numbers")
    return tuple(_number(v, f"{name}[{i}]") for i, v in enumerate(value))


def _expression(source: Any, name: str, n: int) -> str:
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(source)
    if not isinstance(source, str):
        raise ConfigError(name, f"expected an expression string, got {source!r}")
    try:
        parse_expression(source, n)
    except ExprError as exc:
        raise ConfigError(name, str(exc)) from None
    return source


def _entry(doc: dict, n: int) -> CatalogEntry:
    metric = _require(doc, "metric")
    if not isinstance(metric, dict):
        raise ConfigError("metric", "expected a mapping")
    if "catalog" in metric:
        name = metric["catalog"]
        if name not in CATALOG:
            raise ConfigError("metric.catalog", f"unknown catalog instance {name!r}")
        entry = CATALOG[name]
        if entry.n != n:
            raise ConfigError("dimension", f"instance {name!r} has dimension {entry.n}, not {n}")
        return entry
    base = _expression(_require(metric, "base", "metric."), "metric.base", n)
    form = _require(metric, "form", "metric.")
    if not isinstance(form, (list, tuple)) or len(form) != n:
        raise ConfigError("metric.form", f"expected a list of {n} expressions")
    form = tuple(_expression(f, f"metric.form[{i}]", n) for i, f in enumerate(form))
    tags = metric.get("tags", [])
    unknown = set(tags) - set(TAGS)
    if unknown:
        raise ConfigError("metric.tags", f"unknown tags {sorted(unknown)}")
    box = metric.get("x_box")
    if box is not None:
        box = _box(box, "metric.x_box", n)
    return CatalogEntry(str(metric.get("id", "custom")), str(metric.get("description", "")),
                        n, base, form, frozenset(tags), box)


def _box(value, name: str, n: int):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(name, f"expected {n} intervals")
    out = []
    for i, iv in enumerate(value):
        lo, hi = _vector(iv, f"{name}[{i}]", 2)
        if not lo < hi:
            raise ConfigError(f"{name}[{i}]", "interval must satisfy lo < hi")
        out.append((lo, hi))
    return tuple(out)


def parse_config(doc: Any) -> RunConfig:
    """Validate an already-deserialized document."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a mapping at top level")
    n = _integer(_require(doc, "dimension"), "dimension")
    if not 2 <= n <= MAX_DIM:
        raise ConfigError("dimension", f"must lie in [2, {MAX_DIM}], got {n}")
    if doc.get("seed") is None:
        raise ConfigError("seed", "seed required")
    seed = _integer(doc["seed"], "seed")
    entry = _entry(doc, n)

    sample = doc.get("sample", {}) or {}
    if not isinstance(sample, dict):
        raise ConfigError("sample", "expected a mapping")
    count = _integer(sample.get("count", 100), "sample.count")
    if count < 1:
        raise ConfigError("sample.count", "must be >= 1")
    box = _box(sample["x_box"], "sample.x_box", n) if "x_box" in sample else None
    y_scale = _vector(sample.get("y_scale", [0.5, 2.0]), "sample.y_scale", 2)
    if not 0 < y_scale[0] <= y_scale[1]:
        raise ConfigError("sample.y_scale", "must satisfy 0 < lo <= hi")
    plan = SamplePlan(entry.id, count, seed, box, y_scale)

    checks = doc.get("checks", list(DEFAULT_SUITE))
    if not isinstance(checks, (list, tuple)):
        raise ConfigError("checks", "expected a list of check ids")
    for i, cid in enumerate(checks):
        if cid not in REGISTRY:
            raise ConfigError(f"checks[{i}]", f"unknown check id {cid!r}")
    theorems = doc.get("theorems", []) or []
    for i, tid in enumerate(theorems):
        if tid not in THEOREMS:
            raise ConfigError(f"theorems[{i}]", f"unknown theorem {tid!r}")
        missing = THEOREMS[tid].requires - entry.tags
        if missing:
            raise ConfigError(f"theorems[{i}]", f"{entry.id} lacks tags {sorted(missing)}")
    tolerances = doc.get("tolerances", {}) or {}
    if not isinstance(tolerances, dict):
        raise ConfigError("tolerances", "expected a mapping of check id to number")
    tols = {}
    for cid, tol in tolerances.items():
        if cid not in REGISTRY:
            raise ConfigError(f"tolerances.{cid}", f"unknown check id {cid!r}")
        tols[cid] = _number(tol, f"tolerances.{cid}")

    geo = doc.get("geodesic")
    job = None
    if geo is not None:
        if not isinstance(geo, dict):
            raise ConfigError("geodesic", "expected a mapping")
        job = GeodesicJob(_vector(_require(geo, "x0", "geodesic."), "geodesic.x0", n),
                          _vector(_require(geo, "y0", "geodesic."), "geodesic.y0", n),
                          _number(geo.get("t_end", 1.0), "geodesic.t_end"),
                          _number(geo.get("rtol", 1e-9), "geodesic.rtol"))
        if job.t_end <= 0:
            raise ConfigError("geodesic.t_end", "must be positive")
        if not any(job.y0):
            raise ConfigError("geodesic.y0", "must be nonzero")
    return RunConfig(n, seed, entry, plan, tuple(checks), tuple(theorems),
                     bool(doc.get("verify_tags", False)), tols, job, doc)


def load_config(path: str | Path) -> RunConfig:
    """Read a JSON (``.json``) or YAML document and validate it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = yaml.safe_load(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"JSON parse error at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError("<file>", f"YAML parse error{where}") from None
    return parse_config(doc)
