"""Simulation driver and the four headline experiments.

Every experiment fans out independent trajectories through :func:`fan_out`
and reduces the results after sorting by run key, so the report does not
depend on worker count or completion order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..conserved import (
    apriori_E1_bound,
    functional_H1,
    h2_envelope,
    h2_growth_constant,
)
from ..dynamics import ModelParams, Trajectory, evolve, make_initial_data, stability_dt
from ..spectral import FieldState, apply_symbol, make_grid, symbol_lp
from .config import RunConfig
from .io import TimeSeriesWriter, diagnostics_record, write_snapshot

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NUMERICAL",
    "SimulationResult",
    "ExperimentReport",
    "run_simulation",
    "d1_distance",
    "fan_out",
    "fit_slope",
    "experiment_mollified_convergence",
    "experiment_continuous_dependence",
    "experiment_deepwater_limit",
    "experiment_conservation_drift",
    "EXPERIMENTS",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@dataclass
class SimulationResult:
    status: int
    timeseries: Path
    snapshots: list
    records: list
    failure: Optional[str] = None


@dataclass
class ExperimentReport:
    name: str
    passed: bool
    summary: dict
    table: list = field(default_factory=list)
    columns: tuple = ()
    failure: Optional[str] = None

    @property
    def status(self) -> int:
        return EXIT_NUMERICAL if self.failure else EXIT_OK


def initial_state(cfg: RunConfig, grid=None) -> FieldState:
    return make_initial_data(cfg.initial["kind"], grid or cfg.grid, cfg.params.rho, **cfg.initial_kwargs())


def run_simulation(cfg: RunConfig, stem: str = "simulate") -> SimulationResult:
    """Evolve the configured datum, streaming diagnostics to CSV and writing snapshots."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    f0 = initial_state(cfg)
    p = cfg.params
    ts = out / f"{stem}.csv"
    snaps: list[Path] = []
    records: list[dict] = []
    count = [0]
    with TimeSeriesWriter(ts, cfg.echo()) as w:

        def on_record(s: FieldState):
            rec = diagnostics_record(s, p)
            records.append(rec)
            w.write(rec)
            k = count[0]
            count[0] += 1
            if cfg.snapshot_every and k % cfg.snapshot_every == 0:
                path = out / f"{stem}_snap{k:05d}.bin"
                write_snapshot(path, s, p)
                snaps.append(path)

        traj = evolve(f0, cfg.T, cfg.dt, p, cfg.record_every, on_record=on_record)
        if traj.failure:
            w.abort(traj.failure)
    last = out / f"{stem}_final.bin"
    write_snapshot(last, traj.states[-1], p)
    snaps.append(last)
    status = EXIT_NUMERICAL if traj.failure else EXIT_OK
    return SimulationResult(status, ts, snaps, records, traj.failure)


# -- helpers -------------------------------------------------------------------


def d1_distance(f: np.ndarray, g: np.ndarray, grid) -> float:
    """``d^1_rho``: ``||d_x(f-g)|| + ||f-g||_inf + || |f|^2 - |g|^2 ||``."""
    diff = f - g
    ik = 1j * grid.wavenumbers
    ik[grid.nyquist] = 0.0
    d = np.fft.ifft(ik * np.fft.fft(diff))
    return grid.l2(d) + float(np.max(np.abs(diff))) + grid.l2(np.abs(f) ** 2 - np.abs(g) ** 2)


def fit_slope(x, y) -> float:
    """Least-squares slope of ``y`` against ``x``."""
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def _evolve_job(job: dict) -> tuple:
    """Worker entry point: evolve one datum and return every recorded sample."""
    f0: FieldState = job["f0"]
    traj: Trajectory = evolve(f0, job["T"], job["dt"], job["params"], job["record_every"])
    vals = np.array([s.values for s in traj.states])
    return job["key"], traj.times, vals, traj.failure


def fan_out(fn: Callable, jobs: list, workers: int = 1) -> list:
    """Run ``fn`` over ``jobs`` (serially or in a process pool); results sorted by key."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            res = list(ex.map(fn, jobs))
    else:
        res = [fn(j) for j in jobs]
    return sorted(res, key=lambda r: r[0])


def _sup_distance(a: np.ndarray, b: np.ndarray, grid) -> float:
    if a.shape != b.shape:
        raise ValueError("trajectories have different record layouts")
    return max(d1_distance(x, y, grid) for x, y in zip(a, b))


def _first_failure(results) -> Optional[str]:
    for key, _, _, fail in results:
        if fail:
            return f"{key}: {fail}"
    return None


def _steps(cfg: RunConfig, f0: FieldState, p: ModelParams, records: int = 16) -> tuple[float, int]:
    """Common step and record stride for a family of runs."""
    dt = stability_dt(f0, p) if cfg.dt == "auto" else cfg.dt
    nsteps = max(1, math.ceil(cfg.T / dt - 1e-9))
    every = max(1, nsteps // records)
    return dt, every


# -- mollified convergence -------------------------------------------------------


def _mollified_once(cfg: RunConfig, n: int) -> tuple[dict, Optional[str]]:
    grid = make_grid(n, cfg.grid.length)
    phi = initial_state(cfg, grid)
    e = cfg.experiment
    levels = sorted(e["levels"]) + [e["level_max"]]
    base = cfg.params
    dt, every = _steps(cfg, phi, base)
    jobs = []
    for lv in levels:
        p = replace(base, moll_level=lv)
        f0 = apply_symbol(phi, symbol_lp(grid, lv))
        jobs.append({"key": lv, "f0": f0, "T": cfg.T, "dt": dt, "params": p, "record_every": every})
    res = fan_out(_evolve_job, jobs, cfg.workers)
    fail = _first_failure(res)
    if fail:
        return {}, fail
    ref = res[-1][2]
    dist = {lv: _sup_distance(vals, ref, grid) for lv, _, vals, _ in res[:-1]}
    return dist, None


def experiment_mollified_convergence(cfg: RunConfig) -> ExperimentReport:
    """``sup_t d^1(u^(l), u^(l_max))`` against ``l``; slope of ``log2`` distance must be ``<= -1/2``."""
    e = cfg.experiment
    if len(e["levels"]) < 4:
        raise ValueError("mollified convergence needs at least 4 levels")
    grids = [cfg.grid.n, 2 * cfg.grid.n] if e["refine"] else [cfg.grid.n]
    table, slopes, monotone = [], {}, True
    for n in grids:
        dist, fail = _mollified_once(cfg, n)
        if fail:
            return ExperimentReport("mollified", False, {}, failure=fail)
        lv = sorted(dist)
        d = np.array([dist[k] for k in lv])
        slopes[n] = fit_slope(lv, np.log2(d))
        monotone &= bool(np.all(np.diff(d) < 0))
        table += [(n, k, dist[k]) for k in lv]
    s = slopes[cfg.grid.n]
    summary = {"slope": s, "slopes": {str(k): v for k, v in slopes.items()}, "monotone": monotone, "slope_bound": -0.5}
    ok = bool(s <= -0.5 and monotone)
    if len(slopes) == 2:
        s2 = slopes[2 * cfg.grid.n]
        summary["refine_rel_change"] = float(abs(s2 - s) / abs(s))
        ok &= summary["refine_rel_change"] <= 0.10
    return ExperimentReport("mollified", bool(ok), summary, table, ("n", "level", "sup_d1"))


# -- continuous dependence -------------------------------------------------------


def _perturbation(cfg: RunConfig, grid) -> np.ndarray:
    pert = cfg.experiment["perturbation"]
    if pert["kind"] == "random_band":
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        xi = grid.wavenumbers
        sel = (np.abs(xi) <= pert.get("band", 2.0)) & (xi != 0)
        coef = np.zeros(grid.n, dtype=complex)
        coef[sel] = rng.standard_normal(sel.sum()) + 1j * rng.standard_normal(sel.sum())
        # smooth envelope keeps the perturbation away from the seam
        w = np.exp(-((grid.x / (0.15 * grid.length)) ** 2))
        v = w * np.fft.ifft(coef)
    else:
        v = np.exp(-((grid.x - pert.get("center", 0.0)) ** 2) / pert.get("width", 1.0) ** 2) * (1 + 0.5j)
    return v / np.max(np.abs(v))


def experiment_continuous_dependence(cfg: RunConfig) -> ExperimentReport:
    """``sup_t d^1(u, v) / d^1(phi, psi)`` for ``psi = phi + eps * w`` over a sweep of ``eps``."""
    eps = sorted(cfg.experiment["eps"])
    if len(eps) < 4 or eps[-1] / eps[0] < 100:
        raise ValueError("continuity sweep needs at least 4 sizes spanning two decades")
    grid = cfg.grid
    phi = initial_state(cfg)
    w = _perturbation(cfg, grid)
    dt, every = _steps(cfg, phi, cfg.params)
    jobs = [{"key": -1.0, "f0": phi, "T": cfg.T, "dt": dt, "params": cfg.params, "record_every": every}]
    for ep in eps:
        psi = phi.with_values(phi.values + ep * phi.rho * w)
        jobs.append({"key": ep, "f0": psi, "T": cfg.T, "dt": dt, "params": cfg.params, "record_every": every})
    res = fan_out(_evolve_job, jobs, cfg.workers)
    fail = _first_failure(res)
    if fail:
        return ExperimentReport("continuity", False, {}, failure=fail)
    ref = res[0][2]
    table = []
    for ep, _, vals, _ in res[1:]:
        d0 = d1_distance(vals[0], ref[0], grid)
        dmax = _sup_distance(vals, ref, grid)
        table.append((ep, d0, dmax, dmax / d0))
    ratios = np.array([r[3] for r in table])
    slope = fit_slope(np.log10(eps), np.log10(ratios))
    summary = {"slope": slope, "ratio_max": float(ratios.max()), "ratio_min": float(ratios.min())}
    ok = abs(slope) <= 0.1 and ratios.max() <= 100.0 and ratios.min() >= 0.1
    return ExperimentReport("continuity", bool(ok), summary, table, ("eps", "d1_initial", "sup_d1", "ratio"))


# -- deep-water limit -------------------------------------------------------------


def experiment_deepwater_limit(cfg: RunConfig) -> ExperimentReport:
    """``sup_t d^1(u_delta, u_H)`` for increasing ``delta``; decay rate in ``1/delta`` must be ``>= 1``."""
    deltas = list(cfg.experiment["deltas"])
    if len(deltas) < 4:
        raise ValueError("deep-water sweep needs at least 4 depths")
    phi = initial_state(cfg)
    base = cfg.params
    hp = replace(base, nonlocal_op="hilbert")
    dt, every = _steps(cfg, phi, base)
    jobs = [{"key": math.inf, "f0": phi, "T": cfg.T, "dt": dt, "params": hp, "record_every": every}]
    for d in deltas:
        jobs.append(
            {"key": d, "f0": phi, "T": cfg.T, "dt": dt, "params": replace(base, delta=d), "record_every": every}
        )
    res = fan_out(_evolve_job, jobs, cfg.workers)
    fail = _first_failure(res)
    if fail:
        return ExperimentReport("deepwater", False, {}, failure=fail)
    ref = res[-1][2]
    table = [(d, _sup_distance(vals, ref, cfg.grid)) for d, _, vals, _ in res[:-1]]
    dist = np.array([t[1] for t in table])
    monotone = bool(np.all(np.diff(dist) < 0))
    if base.beta == 0:
        summary = {"rate": math.inf, "monotone": monotone, "max_distance": float(dist.max())}
        return ExperimentReport("deepwater", bool(dist.max() == 0.0), summary, table, ("delta", "sup_d1"))
    rate = -fit_slope(np.log(deltas), np.log(dist))
    summary = {"rate": rate, "monotone": monotone}
    return ExperimentReport("deepwater", bool(monotone and rate >= 1.0), summary, table, ("delta", "sup_d1"))


# -- conservation drift -------------------------------------------------------------


def experiment_conservation_drift(cfg: RunConfig) -> ExperimentReport:
    """Relative drifts of the conserved functionals, the ``E^1`` a-priori bound and the ``H_2`` envelope."""
    res = run_simulation(cfg, stem="drift")
    if res.failure:
        return ExperimentReport("drift", False, {}, failure=res.failure)
    recs = res.records
    p = cfg.params
    col = {c: np.array([r[c] for r in recs]) for c in recs[0]}

    def rel(v):
        scale = max(abs(v[0]), 1e-300)
        return float(np.max(np.abs(v - v[0])) / scale) if abs(v[0]) > 0 else float(np.max(np.abs(v)))

    tol = cfg.experiment["drift_tol"]
    mtol = cfg.experiment["mass_tol"]
    L = cfg.grid.length
    summary: dict = {"H1_drift": rel(col["H1"])}
    checks = {"H1": bool(summary["H1_drift"] <= tol)}
    # mass drift relative to rho^2 L when the defect itself vanishes
    mass_scale = max(abs(col["mass"][0]), p.rho**2 * L * 1e-12)
    summary["mass_drift"] = float(np.max(np.abs(col["mass"] - col["mass"][0])) / mass_scale)
    checks["mass"] = bool(summary["mass_drift"] <= mtol)
    if p.integrable:
        summary["H2_inls_drift"] = rel(col["H2_inls"])
        checks["H2_inls"] = bool(summary["H2_inls_drift"] <= tol)
    # H2 growth under the Gronwall envelope with the fixed constant K
    K = h2_growth_constant(p)
    env = h2_envelope(col["t"], col["E1"], col["dx2norm"] ** 2, col["H2"][0], K)
    excess = np.abs(col["H2"] - col["H2"][0]) - env
    summary["H2_envelope_K"] = K
    summary["H2_envelope_margin"] = float(-np.max(excess[1:])) if len(excess) > 1 else 0.0
    checks["H2_envelope"] = bool(np.all(excess <= 1e-12 * max(1.0, abs(col["H2"][0]))))
    summary["E1_max"] = float(col["E1"].max())
    if p.alpha != 0 and p.beta >= 0:
        f0 = initial_state(cfg)
        c1 = apriori_E1_bound(functional_H1(f0, p) * (1 + tol), p, seam=float(col["seam_gap"].max()))
        summary["E1_bound_C1"] = float(c1)
        checks["E1_bound"] = bool(summary["E1_max"] <= c1)
    summary["checks"] = checks
    table = [tuple(r[c] for c in ("t", "H1", "H2", "H2_inls", "mass", "E1")) for r in recs]
    return ExperimentReport(
        "drift", all(checks.values()), summary, table, ("t", "H1", "H2", "H2_inls", "mass", "E1")
    )


EXPERIMENTS = {
    "mollified": experiment_mollified_convergence,
    "continuity": experiment_continuous_dependence,
    "deepwater": experiment_deepwater_limit,
    "drift": experiment_conservation_drift,
}
