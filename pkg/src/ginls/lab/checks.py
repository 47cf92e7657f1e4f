"""Operator verification suite run by ``ginls check-operators``."""
from __future__ import annotations

import numpy as np

from .. import oracles
from ..spectral import make_grid, symbol_Ldelta

__all__ = ["CHECK_DELTAS", "run_operator_checks"]

CHECK_DELTAS = (0.5, 1.0, 2.0, 4.0)
# nodes of both the 1024-point box grid (dx = 1/16) and the line lattices
EVAL_POINTS = np.array([-2.0, -1.0, -0.5, 0.0, 0.25, 1.0, 2.0])
LINE_SPACING = {"gauss": 1 / 64, "shifted_gauss": 1 / 64, "bump": 1 / 128}


def run_operator_checks(deltas=CHECK_DELTAS) -> list[tuple]:
    """Rows ``(group, name, error, tolerance, passed)``."""
    rows = []

    def add(group, name, err, tol):
        rows.append((group, name, float(err), tol, bool(err <= tol)))

    for xi in (0.5, 1.0, 2.0):
        num, closed = oracles.tanh_fourier_check(xi)
        add("fourier", f"tanh@{xi:g}", abs(num - closed), 1e-4)
        num, closed = oracles.coth_fourier_check(xi)
        add("fourier", f"coth@{xi:g}", abs(num - closed), 1e-4)
    xs = np.geomspace(1e-3, 30.0, 4001)
    worst = max(max(oracles.hyperbolic_identity_suite(s * x)) for x in xs for s in (1.0, -1.0))
    add("identity", "hyperbolic", worst, 1e-13)

    grid = make_grid(1024, 64.0)
    for d in deltas:
        r = symbol_Ldelta(grid, d).values
        add("symbol", f"sup r_delta*delta@{d:g}", max(0.0, float(np.max(r[1:])) * d - 1.0), 0.0)

    for name, (f, df) in oracles.oracle_corpus().items():
        lf = oracles.sample_line_function(f, 8.0, LINE_SPACING[name])
        for d in deltas:
            k = oracles.kernel_Tdelta_pv(lf, d, EVAL_POINTS)
            ln = oracles.line_multiplier_Tdelta(lf, d, EVAL_POINTS)
            add("kernel_vs_line", f"{name}@{d:g}", np.max(np.abs(k - ln)) / np.max(np.abs(ln)), 1e-6)
            gl = oracles.grid_vs_line_Tdelta_dx(f, df, d, 1024, 64.0, EVAL_POINTS)
            scale = np.max(np.abs(gl["line"]))
            add("grid_vs_line", f"{name}@{d:g}", np.max(np.abs(gl["corrected_diff"])) / scale, 1e-4)
            off = np.max(np.abs(gl["raw_diff"] + gl["expected_offset"]))
            add("zero_mode_offset", f"{name}@{d:g}", off / scale, 1e-4)
    return rows
