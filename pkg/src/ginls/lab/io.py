"""Time-series CSV and binary snapshot formats.

Time series
    Comment lines start with ``#``: a format tag with the code version, a
    one-line JSON echo of the run configuration, and (for aborted runs) a
    trailing ``# aborted:`` line. Then one header row and one row per record.
    Floats are written with 17 significant digits so values round-trip.

Snapshot
    One line of JSON (grid, rho, t, params, ``"endianness": "little"``)
    terminated by ``\\n``, then ``n`` pairs of little-endian float64
    ``(re, im)`` in grid order.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import IO, Optional

import numpy as np

from .. import __version__
from ..conserved import Densities, functional_H1, functional_H2, functional_H2_inls, renormalized_mass
from ..dynamics import ModelParams
from ..spectral import FieldState, make_grid
from ..zhidkov import energy_Ek, linf, seam_gap

__all__ = [
    "COLUMNS",
    "TimeSeriesWriter",
    "diagnostics_record",
    "read_timeseries",
    "write_snapshot",
    "read_snapshot",
]

COLUMNS = ("t", "E1", "E2", "H1", "H2", "H2_inls", "mass", "linf", "seam_gap", "dx2norm")
FORMAT_TAG = "ginls-timeseries/1"
SNAPSHOT_TAG = "ginls-snapshot/1"


def diagnostics_record(f: FieldState, p: ModelParams) -> dict:
    """All monitored functionals of one state; ``H2_inls`` is NaN off the integrable line."""
    # a diverging state records inf rather than warning on every column
    with np.errstate(over="ignore", invalid="ignore"):
        return _diagnostics(f, p)


def _diagnostics(f: FieldState, p: ModelParams) -> dict:
    D = Densities(f, p)
    return {
        "t": f.time,
        "E1": energy_Ek(f, 1),
        "E2": energy_Ek(f, 2),
        "H1": functional_H1(f, p, D),
        "H2": functional_H2(f, p, D),
        "H2_inls": functional_H2_inls(f, p, D) if p.integrable else math.nan,
        "mass": renormalized_mass(f),
        "linf": linf(f),
        "seam_gap": seam_gap(f),
        "dx2norm": f.grid.l2(D.uxx),
    }


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else "%.17g" % v


class TimeSeriesWriter:
    """Append-only CSV writer that flushes every row (partial output survives aborts)."""

    def __init__(self, path: str | Path, config_echo: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh: Optional[IO[str]] = open(self.path, "w", newline="")
        self._last_t = -math.inf
        self._fh.write(f"# {FORMAT_TAG} version={__version__}\n")
        self._fh.write(f"# config: {config_echo}\n")
        self._fh.write(",".join(COLUMNS) + "\n")
        self._fh.flush()

    def write(self, rec: dict):
        if rec["t"] <= self._last_t:
            raise ValueError("time series rows must have strictly increasing t")
        self._last_t = rec["t"]
        self._fh.write(",".join(_fmt(float(rec[c])) for c in COLUMNS) + "\n")
        self._fh.flush()

    def abort(self, message: str):
        self._fh.write(f"# aborted: {message}\n")
        self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_timeseries(path: str | Path) -> tuple[dict, np.ndarray]:
    """Return ``(meta, data)``; ``data`` is a structured array with the named columns."""
    meta: dict = {"aborted": None}
    rows = []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("config:"):
                    meta["config"] = json.loads(body[len("config:") :])
                elif body.startswith("aborted:"):
                    meta["aborted"] = body[len("aborted:") :].strip()
                elif body.startswith(FORMAT_TAG):
                    meta["version"] = body.split("version=", 1)[-1]
                continue
            if header is None:
                header = tuple(line.split(","))
                if header != COLUMNS:
                    raise ValueError(f"unexpected columns {header}")
                continue
            vals = [float(v) for v in line.split(",")]
            if len(vals) != len(COLUMNS):
                raise ValueError(f"row has {len(vals)} fields, expected {len(COLUMNS)}")
            rows.append(tuple(vals))
    dtype = [(c, float) for c in COLUMNS]
    return meta, np.array(rows, dtype=dtype)


def write_snapshot(path: str | Path, f: FieldState, p: Optional[ModelParams] = None):
    head = {
        "format": SNAPSHOT_TAG,
        "n": f.grid.n,
        "length": f.grid.length,
        "rho": f.rho,
        "t": f.time,
        "params": None if p is None else asdict(p),
        "endianness": "little",
        "dtype": "float64",
        "layout": "re,im",
    }
    data = np.empty(2 * f.grid.n, dtype="<f8")
    data[0::2] = f.values.real
    data[1::2] = f.values.imag
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write((json.dumps(head, sort_keys=True) + "\n").encode())
        fh.write(data.tobytes())


def read_snapshot(path: str | Path) -> tuple[FieldState, dict]:
    with open(path, "rb") as fh:
        head = json.loads(fh.readline().decode())
        if head.get("format") != SNAPSHOT_TAG or head.get("endianness") != "little":
            raise ValueError(f"{path}: not a little-endian {SNAPSHOT_TAG} file")
        raw = fh.read()
    n = int(head["n"])
    data = np.frombuffer(raw, dtype="<f8")
    if data.size != 2 * n:
        raise ValueError(f"{path}: expected {2 * n} floats, found {data.size}")
    grid = make_grid(n, float(head["length"]))
    return FieldState(grid, data[0::2] + 1j * data[1::2], head["rho"], head["t"]), head
