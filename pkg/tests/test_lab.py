import math

import numpy as np
import pytest
import yaml

from ginls import __version__
from ginls.dynamics import make_initial_data
from ginls.lab.cli import main
from ginls.lab.config import ConfigError, apply_override, load_config
from ginls.lab.experiments import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    d1_distance,
    experiment_conservation_drift,
    experiment_continuous_dependence,
    experiment_deepwater_limit,
    fan_out,
    fit_slope,
    run_simulation,
)
from ginls.lab.io import (
    COLUMNS,
    TimeSeriesWriter,
    read_snapshot,
    read_timeseries,
    write_snapshot,
)
from ginls.spectral import make_grid

SMALL = ["grid.n=128", "grid.length=20.0", "run.T=0.1", "run.record_every=5"]


def _cfg(tmp_path, *extra, **kw):
    return load_config(None, SMALL + list(extra), out=str(tmp_path), **kw)


# -- configuration -------------------------------------------------------------------


def test_defaults_load():
    cfg = load_config()
    assert cfg.grid.n == 1024 and cfg.grid.length == 64.0
    assert cfg.params.integrable and cfg.dt == "auto"
    assert cfg.initial == {"kind": "grey_pair", "theta": 0.3}


def test_all_errors_reported_at_once(tmp_path):
    bad = {
        "grid": {"n": -4, "length": 0},
        "params": {"delta": -1.0, "rho": 0.0, "nonlocal_op": "fourier"},
        "run": {"T": "long"},
    }
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(bad))
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    text = "\n".join(exc.value.errors)
    for key in ("grid.n", "grid.length", "params.delta", "params.rho", "params.nonlocal_op", "run.T"):
        assert key in text
    assert len(exc.value.errors) >= 6


def test_unknown_fields_rejected(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("grid: {n: 64, width: 3}\nsolver: {}\n")
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    text = str(exc.value)
    assert "width" in text and "solver" in text


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    p = tmp_path / "broken.yaml"
    p.write_text("grid: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("- a\n- b\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_override_parsing():
    d = {"run": {"dt": "auto"}, "initial": {"kind": "grey_pair", "theta": 0.3}}
    apply_override(d, "run.dt=1e-3")
    assert d["run"]["dt"] == 1e-3
    apply_override(d, "initial.kind=plane_wave")
    assert d["initial"] == {"kind": "plane_wave"}
    with pytest.raises(ConfigError):
        apply_override(d, "novalue")
    with pytest.raises(ConfigError):
        apply_override(d, "=3")


def test_initial_preconditions_checked(tmp_path):
    # a grey pair on a box too short for its tails fails the seam check before stepping
    with pytest.raises(ConfigError):
        load_config(None, ["grid.length=6.0", "grid.n=64"], out=str(tmp_path))
    with pytest.raises(ConfigError):
        _cfg(tmp_path, "initial.kind=plane_wave", "initial.k=0.3")


def test_echo_roundtrip(tmp_path):
    cfg = _cfg(tmp_path, "seed=5", "initial.kind=constant", "run.dt=1e-3")
    echo = yaml.safe_load(cfg.echo())
    assert echo["seed"] == 5 and echo["run"]["dt"] == 1e-3 and cfg.dt == 1e-3


def test_exponent_floats_in_files(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("run: {dt: 2e-3, T: 1e-1}\nexperiment: {eps: [1e-4, 1e-3, 1e-2, 1e-1]}\n")
    cfg = load_config(p)
    assert cfg.dt == 2e-3 and cfg.T == 0.1 and cfg.experiment["eps"][0] == 1e-4


# -- persistence -----------------------------------------------------------------------


def _rec(t):
    return {c: (t if c == "t" else 1.0 + t) for c in COLUMNS}


def test_timeseries_roundtrip(tmp_path):
    path = tmp_path / "ts.csv"
    with TimeSeriesWriter(path, '{"a":1}') as w:
        for t in (0.0, 0.5, 1.0):
            w.write(_rec(t))
    meta, data = read_timeseries(path)
    assert meta["config"] == {"a": 1} and meta["version"] == __version__ and meta["aborted"] is None
    assert data.dtype.names == COLUMNS
    assert np.array_equal(data["t"], [0.0, 0.5, 1.0])


def test_timeseries_requires_increasing_time(tmp_path):
    with TimeSeriesWriter(tmp_path / "ts.csv", "{}") as w:
        w.write(_rec(1.0))
        with pytest.raises(ValueError):
            w.write(_rec(1.0))


def test_timeseries_nan_and_abort(tmp_path):
    path = tmp_path / "ts.csv"
    with TimeSeriesWriter(path, "{}") as w:
        r = _rec(0.0)
        r["H2_inls"] = math.nan
        w.write(r)
        w.abort("overflow at t=0.1")
    meta, data = read_timeseries(path)
    assert math.isnan(data["H2_inls"][0])
    assert meta["aborted"] == "overflow at t=0.1"


def test_snapshot_roundtrip_bit_exact(tmp_path):
    g = make_grid(64, 10.0)
    rng = np.random.Generator(np.random.Philox(1))
    f = make_initial_data("constant", g, 1.3)
    f = f.with_values(f.values + 1e-3 * (rng.standard_normal(64) + 1j * rng.standard_normal(64)))
    path = tmp_path / "s.bin"
    write_snapshot(path, f)
    h, head = read_snapshot(path)
    assert np.array_equal(h.values, f.values)
    assert head["n"] == 64 and h.rho == 1.3 and h.grid.length == 10.0


def test_snapshot_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b'{"format": "other"}\n')
    with pytest.raises(ValueError):
        read_snapshot(p)
    g = make_grid(16, 1.0)
    write_snapshot(p, make_initial_data("constant", g, 1.0))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_snapshot(p)


# -- simulation driver ---------------------------------------------------------------------


def test_constant_run_has_no_drift(tmp_path):
    res = run_simulation(_cfg(tmp_path, "initial.kind=constant"))
    assert res.status == EXIT_OK
    _, data = read_timeseries(res.timeseries)
    for c in ("E1", "H1", "H2", "H2_inls", "mass"):
        assert np.max(np.abs(data[c] - data[c][0])) <= 1e-12
    f, _ = read_snapshot(res.snapshots[-1])
    assert f.time == pytest.approx(0.1)


def test_plane_wave_run_h1_closed_form(tmp_path):
    cfg = _cfg(tmp_path, "initial.kind=plane_wave", f"initial.k={2 * math.pi / 20 * 3!r}")
    res = run_simulation(cfg)
    _, data = read_timeseries(res.timeseries)
    k = 2 * math.pi / 20 * 3
    assert np.allclose(data["H1"], k**2 * 20.0, rtol=1e-10)


def test_grey_pair_seam_stays_small(tmp_path):
    cfg = load_config(None, ["run.T=0.5", "run.record_every=20"], out=str(tmp_path))
    res = run_simulation(cfg)
    _, data = read_timeseries(res.timeseries)
    assert np.all(data["seam_gap"] <= 1e-6)


def test_runs_are_deterministic(tmp_path):
    args = ["initial.kind=random_band", "initial.band=3.0", "initial.amp=0.2"]
    a = run_simulation(_cfg(tmp_path / "a", *args, seed=9))
    b = run_simulation(_cfg(tmp_path / "b", *args, seed=9))
    c = run_simulation(_cfg(tmp_path / "c", *args, seed=10))
    # the config echo differs only in the output directory
    rows = [r.timeseries.read_text().splitlines()[2:] for r in (a, b, c)]
    assert rows[0] == rows[1] and rows[0] != rows[2]
    assert a.snapshots[-1].read_bytes() == b.snapshots[-1].read_bytes()


def test_snapshots_written_on_schedule(tmp_path):
    res = run_simulation(_cfg(tmp_path, "initial.kind=constant", "run.snapshot_every=2"))
    names = sorted(p.name for p in res.snapshots)
    assert "simulate_final.bin" in names
    assert sum("snap" in n for n in names) >= 2


BLOWUP = [
    "initial.kind=bump_perturbation",
    "initial.amp=50.0",
    "initial.width=1.0",
    "run.dt=0.25",
    "run.T=5.0",
    "run.record_every=1",
]


def test_failure_keeps_partial_output(tmp_path):
    res = run_simulation(_cfg(tmp_path, *BLOWUP))
    assert res.status == EXIT_NUMERICAL and res.failure
    meta, data = read_timeseries(res.timeseries)
    assert meta["aborted"]
    assert len(data) >= 1 and np.isfinite(data["E1"][0])
    f, _ = read_snapshot(res.snapshots[-1])
    assert np.all(np.isfinite(f.values))


# -- CLI -------------------------------------------------------------------------------------


def test_cli_version(capsys):
    assert main(["version"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == __version__


def test_cli_simulate_writes_table_and_figure(tmp_path, capsys):
    argv = ["simulate", "--out", str(tmp_path), "--override", "initial.kind=constant"]
    for o in SMALL:
        argv += ["--override", o]
    assert main(argv) == EXIT_OK
    out = dict(line.split("\t", 1) for line in capsys.readouterr().out.splitlines())
    assert out["timeseries"].endswith(".csv") and out["figure"].endswith(".png")
    assert (tmp_path / "simulate.png").stat().st_size > 0


def test_cli_config_errors_exit_2(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text("grid: {n: 0}\n")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "grid.n" in capsys.readouterr().err
    assert main(["simulate", "--override", "bogus", "--out", str(tmp_path)]) == EXIT_CONFIG
    # experiment precondition: too few depths
    argv = ["experiment", "deepwater", "--out", str(tmp_path), "--override", "experiment.deltas=[2.0]"]
    assert main(argv) == EXIT_CONFIG


def test_cli_seed_range():
    with pytest.raises(SystemExit):
        main(["simulate", "--seed", "-1"])
    with pytest.raises(SystemExit):
        main(["simulate", "--seed", str(2**64)])


def test_cli_numerical_failure_exit_3(tmp_path, capsys):
    argv = ["simulate", "--no-plots", "--out", str(tmp_path)]
    for o in SMALL + BLOWUP:
        argv += ["--override", o]
    assert main(argv) == EXIT_NUMERICAL
    assert "error" in capsys.readouterr().err
    meta, _ = read_timeseries(tmp_path / "simulate.csv")
    assert meta["aborted"]


@pytest.mark.slow
def test_cli_check_operators(tmp_path, capsys):
    assert main(["check-operators", "--out", str(tmp_path)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
    assert (tmp_path / "check_operators.csv").exists() and (tmp_path / "check_operators.png").exists()


def test_cli_experiment_outputs(tmp_path, capsys):
    argv = ["experiment", "drift", "--out", str(tmp_path)]
    for o in SMALL + ["initial.kind=random_band", "initial.amp=0.2"]:
        argv += ["--override", o]
    assert main(argv) == EXIT_OK
    out = capsys.readouterr().out
    assert "passed\tTrue" in out
    for name in ("drift.csv", "drift_summary.json", "drift.png"):
        assert (tmp_path / name).exists()


# -- experiment helpers ------------------------------------------------------------------------


def _square(job):
    return job["key"], job["key"] ** 2


def test_fan_out_sorted_and_worker_independent():
    jobs = [{"key": k} for k in (3, 1, 2, 0)]
    serial = fan_out(_square, jobs, 1)
    pooled = fan_out(_square, jobs, 2)
    assert serial == pooled == [(0, 0), (1, 1), (2, 4), (3, 9)]


def test_d1_distance_and_slope():
    g = make_grid(64, 2 * np.pi)
    f = np.exp(1j * g.x)
    assert d1_distance(f, f, g) == 0.0
    # constant phase rotation: ||d(f-g)|| = |1-e^{ic}| sqrt(2 pi), sup = |1-e^{ic}|, modulus unchanged
    c = abs(1 - np.exp(0.1j))
    assert d1_distance(f, f * np.exp(0.1j), g) == pytest.approx(c * (math.sqrt(2 * math.pi) + 1), rel=1e-12)
    assert fit_slope([0, 1, 2], [1, 3, 5]) == pytest.approx(2.0)


def test_small_drift_experiment(tmp_path):
    rep = experiment_conservation_drift(_cfg(tmp_path, "initial.kind=random_band", "initial.amp=0.2", "params.beta=0.5"))
    assert rep.passed, rep.summary
    assert "H2_inls_drift" not in rep.summary
    assert rep.summary["checks"]["H2_envelope"]


def test_small_deepwater_and_continuity_reports(tmp_path):
    base = ["grid.n=128", "grid.length=32.0", "run.T=0.2", "initial.kind=bump_perturbation", "initial.amp=0.3"]
    rep = experiment_deepwater_limit(load_config(None, base, out=str(tmp_path)))
    assert rep.columns == ("delta", "sup_d1") and len(rep.table) == 4
    assert rep.summary["monotone"]
    rep = experiment_continuous_dependence(load_config(None, base, out=str(tmp_path)))
    assert len(rep.table) == 5 and rep.passed
    with pytest.raises(ValueError):
        experiment_continuous_dependence(load_config(None, base + ["experiment.eps=[1e-3, 2e-3]"], out=str(tmp_path)))


def test_workers_do_not_change_results(tmp_path):
    base = ["grid.n=128", "grid.length=32.0", "run.T=0.1", "initial.kind=bump_perturbation", "initial.amp=0.3"]
    a = experiment_deepwater_limit(load_config(None, base, out=str(tmp_path), workers=1))
    b = experiment_deepwater_limit(load_config(None, base, out=str(tmp_path), workers=2))
    assert a.table == b.table
