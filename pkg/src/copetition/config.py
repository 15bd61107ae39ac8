"""Run configuration: a YAML (or JSON) file plus ``key=value`` overrides."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import yaml

from .ingest import parse_timestamp
from .synth import PlantedSpec


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


DEFAULTS: dict = {
    "outdir": "out",
    "inputs": {"shares": None, "items": None},
    "sides": ["item", "actor"],
    "filter": {
        "item": {"quantile": 0.10, "drop_isolated": True},
        "actor": {"quantile": 0.05, "drop_isolated": False},
    },
    "louvain": {"resolution": 1.0, "seed": 0},
    "pagerank": {"damping": 0.85, "tol": 1e-10, "max_iter": 200},
    "temporal_boundaries": ["2014-01-01T00:00:00Z", "2015-01-01T00:00:00Z"],
    "top_k": 10,
    "profile_top_k": 20,
    "histogram_bins_per_decade": 4,
    "max_degree_warning": 50_000,
    "synth": {"out": None},
}


@dataclass(frozen=True)
class SideFilter:
    quantile: float
    drop_isolated: bool


@dataclass(frozen=True)
class RunConfig:
    outdir: str
    shares_path: str
    items_path: str
    sides: tuple[str, ...]
    filters: dict[str, SideFilter]
    resolution: float
    louvain_seed: int | None
    damping: float
    tol: float
    max_iter: int
    boundaries: tuple[int, ...]
    top_k: int
    profile_top_k: int
    bins_per_decade: int
    max_degree_warning: int
    synth: PlantedSpec
    synth_out: str
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    def hash(self) -> str:
        """Digest of the effective configuration, independent of the output location."""
        body = {k: v for k, v in self.raw.items() if k != "outdir"}
        inputs = dict(body.get("inputs") or {})
        body["inputs"] = {k: os.path.basename(v) if v else v for k, v in inputs.items()}
        if "synth" in body:
            body["synth"] = {k: v for k, v in body["synth"].items() if k != "out"}
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def apply_override(cfg: dict, text: str) -> None:
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, value = text.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = yaml.safe_load(value) if value.strip() else None


def _num(raw: dict, key: str, lo=None, hi=None, lo_open=False, integer=False):
    node = raw
    for p in key.split("."):
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(key, "missing")
        node = node[p]
    v = node
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(key, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if hi is not None and v > hi:
        raise ConfigError(key, f"must be <= {hi}, got {v!r}")
    return int(v) if integer else float(v)


def validate(raw: dict, base_dir: str = ".") -> RunConfig:
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")

    def path(v):
        return None if v is None else os.path.normpath(os.path.join(base_dir, str(v)))

    outdir = raw.get("outdir")
    if not isinstance(outdir, str) or not outdir:
        raise ConfigError("outdir", "must be a non-empty path")
    outdir = path(outdir)

    sides = raw.get("sides")
    if isinstance(sides, str):
        sides = [sides]
    if not isinstance(sides, list) or not sides or any(s not in ("item", "actor") for s in sides):
        raise ConfigError("sides", f"must be a list drawn from item, actor; got {sides!r}")
    filters = {}
    for side in ("item", "actor"):
        q = _num(raw, f"filter.{side}.quantile", lo=0.0, hi=1.0, lo_open=True)
        drop = raw["filter"][side].get("drop_isolated", False)
        if not isinstance(drop, bool):
            raise ConfigError(f"filter.{side}.drop_isolated", "expected true/false")
        filters[side] = SideFilter(q, drop)

    seed = raw.get("louvain", {}).get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ConfigError("louvain.seed", f"expected an integer or null, got {seed!r}")

    bounds = raw.get("temporal_boundaries") or []
    if not isinstance(bounds, list):
        raise ConfigError("temporal_boundaries", "expected a list of timestamps")
    try:
        bts = tuple(parse_timestamp(b if not hasattr(b, "isoformat") else b.isoformat()) for b in bounds)
    except (ValueError, TypeError) as exc:
        raise ConfigError("temporal_boundaries", str(exc)) from None
    if any(b2 <= b1 for b1, b2 in zip(bts, bts[1:])):
        raise ConfigError("temporal_boundaries", "must be strictly increasing")

    synth_raw = dict(raw.get("synth") or {})
    synth_out = path(synth_raw.pop("out", None)) or os.path.join(outdir, "synth")
    names = {f.name for f in dataclasses.fields(PlantedSpec)}
    bad = set(synth_raw) - names
    if bad:
        raise ConfigError(f"synth.{sorted(bad)[0]}", "unknown key")
    for k, v in synth_raw.items():
        if isinstance(v, list):
            synth_raw[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
    try:
        spec = PlantedSpec(**synth_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("synth", str(exc)) from None

    inputs = raw.get("inputs") or {}
    shares = path(inputs.get("shares")) or os.path.join(synth_out, "shares.jsonl")
    items = path(inputs.get("items")) or os.path.join(synth_out, "items.csv")

    return RunConfig(
        outdir=outdir, shares_path=shares, items_path=items, sides=tuple(sides), filters=filters,
        resolution=_num(raw, "louvain.resolution", lo=0.0, lo_open=True),
        louvain_seed=seed,
        damping=_num(raw, "pagerank.damping", lo=0.0, hi=0.999999),
        tol=_num(raw, "pagerank.tol", lo=0.0, lo_open=True),
        max_iter=_num(raw, "pagerank.max_iter", lo=1, integer=True),
        boundaries=bts,
        top_k=_num(raw, "top_k", lo=0, integer=True),
        profile_top_k=_num(raw, "profile_top_k", lo=0, integer=True),
        bins_per_decade=_num(raw, "histogram_bins_per_decade", lo=1, integer=True),
        max_degree_warning=_num(raw, "max_degree_warning", lo=1, integer=True),
        synth=spec, synth_out=synth_out, raw=raw,
    )


def load(path: str | None = None, overrides=()) -> RunConfig:
    """Defaults, then the file at ``path``, then each ``key=value`` override."""
    raw = copy.deepcopy(DEFAULTS)
    base_dir = "."
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError("--config", f"not valid YAML/JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("--config", "top level must be a mapping")
        raw = _merge(raw, loaded)
        base_dir = os.path.dirname(os.path.abspath(path))
    for ov in overrides:
        apply_override(raw, ov)
    # normalize YAML datetimes so the hash is stable
    raw = json.loads(json.dumps(raw, default=str))
    return validate(raw, base_dir)
