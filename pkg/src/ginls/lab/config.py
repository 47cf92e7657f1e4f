"""Run configuration: YAML loading, dotted overrides and fail-fast validation."""
from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from ..dynamics import NONLOCAL_OPS, ModelParams
from ..spectral import GridSpec, make_grid

__all__ = ["ConfigError", "RunConfig", "DEFAULTS", "load_config", "apply_override", "build_config"]

INITIAL_KINDS = {
    "constant": set(),
    "plane_wave": {"k"},
    "grey_pair": {"theta", "x0", "seam_tol"},
    "bump_perturbation": {"amp", "width", "profile", "phase", "center"},
    "random_band": {"seed", "band", "amp"},
}

DEFAULTS: dict[str, Any] = {
    "grid": {"n": 1024, "length": 64.0},
    "params": {
        "alpha": 1.0,
        "beta": 1.0,
        "delta": 1.0,
        "rho": 1.0,
        "moll_level": None,
        "dealias": True,
        "nonlocal_op": "tdelta",
    },
    "initial": {"kind": "grey_pair", "theta": 0.3},
    "run": {"T": 1.0, "dt": "auto", "record_every": 50, "snapshot_every": 0},
    "seed": 0,
    "out": "runs",
    "workers": 1,
    "experiment": {
        # mollified
        "levels": [1, 2, 3, 4, 5],
        "level_max": 6,
        "refine": True,
        # deep water
        "deltas": [2.0, 4.0, 8.0, 16.0],
        # continuity
        "eps": [1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
        "perturbation": {"kind": "random_band", "band": 2.0},
        # drift
        "drift_tol": 1e-6,
        "mass_tol": 1e-6,
    },
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def _yaml_load(stream):
    return yaml.load(stream, Loader=_Loader)


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every offending field."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    params: ModelParams
    initial: dict
    T: float
    dt: float | str
    record_every: int
    snapshot_every: int
    seed: int
    out: Path
    workers: int
    experiment: dict
    raw: dict

    def echo(self) -> str:
        """Single-line JSON echo of the resolved configuration."""
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def initial_kwargs(self) -> dict:
        kw = {k: v for k, v in self.initial.items() if k != "kind"}
        if self.initial["kind"] == "random_band":
            kw.setdefault("seed", self.seed)
        return kw


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "initial":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_override(cfg: dict, item: str) -> dict:
    """Apply ``a.b.c=value``; the value is parsed as YAML (so ``1e-3``, ``true``, ``[1,2]`` work)."""
    if "=" not in item:
        raise ConfigError([f"override {item!r} is not of the form key=value"])
    key, text = item.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError([f"override {item!r} has an empty key"])
    try:
        value = _yaml_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"override {key}: cannot parse value {text!r} ({exc})"]) from None
    if parts == ["initial", "kind"]:
        # a new datum kind starts from a clean parameter set
        cfg["initial"] = {"kind": value}
        return cfg
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value
    return cfg


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _validate(d: dict) -> list[str]:
    errs: list[str] = []
    for sec in ("grid", "params", "initial", "run", "experiment"):
        if not isinstance(d.get(sec), dict):
            errs.append(f"{sec}: must be a mapping, got {d.get(sec)!r}")
    if errs:
        return errs
    known = set(DEFAULTS)
    for k in d:
        if k not in known:
            errs.append(f"{k}: unknown section")
    for sec in ("grid", "params", "run", "experiment"):
        for k in d.get(sec, {}):
            if k not in DEFAULTS[sec]:
                errs.append(f"{sec}.{k}: unknown field")

    g = d["grid"]
    n = g.get("n")
    if not _is_int(n) or n < 8 or n & (n - 1):
        errs.append(f"grid.n: must be a power of two >= 8, got {n!r}")
    if not _is_real(g.get("length")) or g["length"] <= 0:
        errs.append(f"grid.length: must be a positive real, got {g.get('length')!r}")

    p = d["params"]
    for k in ("alpha", "beta"):
        if not _is_real(p.get(k)):
            errs.append(f"params.{k}: must be a finite real, got {p.get(k)!r}")
    for k in ("delta", "rho"):
        if not _is_real(p.get(k)) or p[k] <= 0:
            errs.append(f"params.{k}: must be a positive real, got {p.get(k)!r}")
    ml = p.get("moll_level")
    if ml is not None and (not _is_int(ml) or ml < 0):
        errs.append(f"params.moll_level: must be null or a nonnegative integer, got {ml!r}")
    if not isinstance(p.get("dealias"), bool):
        errs.append(f"params.dealias: must be true or false, got {p.get('dealias')!r}")
    if p.get("nonlocal_op") not in NONLOCAL_OPS:
        errs.append(f"params.nonlocal_op: must be one of {list(NONLOCAL_OPS)}, got {p.get('nonlocal_op')!r}")

    ini = d["initial"]
    if not isinstance(ini, dict) or ini.get("kind") not in INITIAL_KINDS:
        errs.append(f"initial.kind: must be one of {sorted(INITIAL_KINDS)}, got {ini.get('kind') if isinstance(ini, dict) else ini!r}")
    else:
        for k in ini:
            if k != "kind" and k not in INITIAL_KINDS[ini["kind"]]:
                errs.append(f"initial.{k}: not a parameter of kind {ini['kind']!r}")

    r = d["run"]
    if not _is_real(r.get("T")) or r["T"] <= 0:
        errs.append(f"run.T: must be a positive real, got {r.get('T')!r}")
    dt = r.get("dt")
    if dt != "auto" and (not _is_real(dt) or dt <= 0):
        errs.append(f"run.dt: must be 'auto' or a positive real, got {dt!r}")
    for k in ("record_every",):
        if not _is_int(r.get(k)) or r[k] < 1:
            errs.append(f"run.{k}: must be a positive integer, got {r.get(k)!r}")
    if not _is_int(r.get("snapshot_every")) or r["snapshot_every"] < 0:
        errs.append(f"run.snapshot_every: must be a nonnegative integer, got {r.get('snapshot_every')!r}")

    if not _is_int(d.get("seed")) or not 0 <= d["seed"] < 2**64:
        errs.append(f"seed: must be an integer in [0, 2^64), got {d.get('seed')!r}")
    if not _is_int(d.get("workers")) or d["workers"] < 1:
        errs.append(f"workers: must be a positive integer, got {d.get('workers')!r}")
    if not isinstance(d.get("out"), str) or not d["out"]:
        errs.append(f"out: must be a nonempty path string, got {d.get('out')!r}")

    e = d["experiment"]
    lv = e.get("levels")
    if not isinstance(lv, list) or not all(_is_int(v) and v >= 0 for v in lv):
        errs.append(f"experiment.levels: must be a list of nonnegative integers, got {lv!r}")
    elif _is_int(e.get("level_max")) and any(v >= e["level_max"] for v in lv):
        errs.append("experiment.levels: every level must be below experiment.level_max")
    if not _is_int(e.get("level_max")) or e["level_max"] < 1:
        errs.append(f"experiment.level_max: must be a positive integer, got {e.get('level_max')!r}")
    ds = e.get("deltas")
    if not isinstance(ds, list) or not all(_is_real(v) and v > 0 for v in ds):
        errs.append(f"experiment.deltas: must be a list of positive reals, got {ds!r}")
    elif any(b <= a for a, b in zip(ds, ds[1:])):
        errs.append("experiment.deltas: must be strictly increasing")
    es = e.get("eps")
    if not isinstance(es, list) or not all(_is_real(v) and v > 0 for v in es):
        errs.append(f"experiment.eps: must be a list of positive reals (zero is degenerate), got {es!r}")
    pert = e.get("perturbation")
    if not isinstance(pert, dict) or pert.get("kind") not in ("random_band", "gauss"):
        errs.append("experiment.perturbation.kind: must be 'random_band' or 'gauss'")
    for k in ("drift_tol", "mass_tol"):
        if not _is_real(e.get(k)) or e[k] <= 0:
            errs.append(f"experiment.{k}: must be a positive real, got {e.get(k)!r}")
    if not isinstance(e.get("refine"), bool):
        errs.append(f"experiment.refine: must be true or false, got {e.get('refine')!r}")
    return errs


def build_config(d: dict) -> RunConfig:
    """Validate a merged dictionary and build the typed config (all errors at once)."""
    errs = _validate(d)
    if errs:
        raise ConfigError(errs)
    g = d["grid"]
    p = d["params"]
    grid = make_grid(g["n"], float(g["length"]))
    params = ModelParams(
        alpha=float(p["alpha"]),
        beta=float(p["beta"]),
        delta=float(p["delta"]),
        rho=float(p["rho"]),
        moll_level=p["moll_level"],
        dealias=p["dealias"],
        nonlocal_op=p["nonlocal_op"],
    )
    # the datum's own preconditions (seam, periodicity) are checked before any stepping
    from ..dynamics import make_initial_data

    kw = {k: v for k, v in d["initial"].items() if k != "kind"}
    if d["initial"]["kind"] == "random_band":
        kw.setdefault("seed", d["seed"])
    try:
        make_initial_data(d["initial"]["kind"], grid, params.rho, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError([f"initial: {exc}"]) from None
    r = d["run"]
    return RunConfig(
        grid=grid,
        params=params,
        initial=dict(d["initial"]),
        T=float(r["T"]),
        dt=r["dt"] if r["dt"] == "auto" else float(r["dt"]),
        record_every=r["record_every"],
        snapshot_every=r["snapshot_every"],
        seed=d["seed"],
        out=Path(d["out"]),
        workers=d["workers"],
        experiment=copy.deepcopy(d["experiment"]),
        raw=d,
    )


def load_config(
    path: str | Path | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
    out: str | None = None,
    workers: int | None = None,
) -> RunConfig:
    d = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                user = _yaml_load(fh) or {}
        except OSError as exc:
            raise ConfigError([f"config: cannot read {path} ({exc.strerror})"]) from None
        except yaml.YAMLError as exc:
            raise ConfigError([f"config: {path} is not valid YAML ({exc})"]) from None
        if not isinstance(user, dict):
            raise ConfigError([f"config: top level of {path} must be a mapping"])
        d = _merge(d, user)
    for item in overrides or []:
        d = apply_override(d, item)
    if seed is not None:
        d["seed"] = seed
    if out is not None:
        d["out"] = out
    if workers is not None:
        d["workers"] = workers
    return build_config(d)
