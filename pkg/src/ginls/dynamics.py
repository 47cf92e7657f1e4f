"""Nonlinearity, mollified right-hand side and time stepping for the gINLS flow.

The equation is ``i u_t - u_xx = P N(P u)`` with
``N(u) = u (i alpha - beta T_delta) d_x |u|^2`` and ``P = P_{<=l}`` (identity
when unmollified). The linear part is integrated exactly with the free
propagator ``exp(i t xi^2)`` and the nonlinear coupling with classical RK4 in
the interaction picture.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from .spectral import (
    FieldState,
    GridSpec,
    lp_bump,
    symbol_dealias,
    symbol_hilbert_dx,
    symbol_Ldelta,
    symbol_Tdelta_dx,
)

__all__ = [
    "ModelParams",
    "Trajectory",
    "StepFailure",
    "nonlinearity",
    "nonlinearity_split",
    "rhs_mollified",
    "stability_dt",
    "step",
    "evolve",
    "duhamel_residual",
    "make_initial_data",
]

NONLOCAL_OPS = ("tdelta", "hilbert")


class StepFailure(FloatingPointError):
    """A time step produced non-finite values."""


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the equation plus discretization switches.

    ``moll_level=None`` means unmollified. ``nonlocal_op="hilbert"`` swaps
    ``T_delta d_x`` for ``H d_x`` (the deep-water companion equation).
    """

    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 1.0
    rho: float = 1.0
    moll_level: Optional[int] = None
    dealias: bool = True
    nonlocal_op: str = "tdelta"

    def __post_init__(self):
        for name in ("alpha", "beta", "delta", "rho"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite real, got {v!r}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho!r}")
        if self.moll_level is not None and (int(self.moll_level) != self.moll_level or self.moll_level < 0):
            raise ValueError(f"moll_level must be a nonnegative integer or None, got {self.moll_level!r}")
        if self.nonlocal_op not in NONLOCAL_OPS:
            raise ValueError(f"nonlocal_op must be one of {NONLOCAL_OPS}, got {self.nonlocal_op!r}")

    @property
    def integrable(self) -> bool:
        return self.beta != 0 and abs(self.beta) == abs(self.alpha)


@dataclass
class Trajectory:
    states: list
    params: ModelParams
    dt: float
    record_every: int = 1
    stepper_order: int = 4
    failure: Optional[str] = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def completed(self) -> bool:
        return self.failure is None


class _Operators:
    """Symbol tables for one (grid, params) pair."""

    def __init__(self, grid: GridSpec, p: ModelParams):
        self.grid = grid
        xi = grid.wavenumbers
        self.ik = 1j * xi
        self.ik[grid.nyquist] = 0.0
        if p.nonlocal_op == "hilbert":
            self.tdx = symbol_hilbert_dx(grid).values
        else:
            self.tdx = symbol_Tdelta_dx(grid, p.delta).values
        self.ldelta = symbol_Ldelta(grid, p.delta).values
        self.hdx = symbol_hilbert_dx(grid).values
        self.mask = symbol_dealias(grid).values if p.dealias else None
        self.moll = None if p.moll_level is None else lp_bump(xi / 2.0**p.moll_level)
        self.lin = 1j * xi**2

    def density_hat(self, u):
        rh = np.fft.fft(np.abs(u) ** 2)
        if self.mask is not None:
            rh *= self.mask
        return rh

    def n_hat(self, u, p: ModelParams):
        """Fourier coefficients of N(u)."""
        rh = self.density_hat(u)
        d = np.fft.ifft(self.ik * rh)
        t = np.fft.ifft(self.tdx * rh)
        nh = np.fft.fft(u * (1j * p.alpha * d - p.beta * t))
        if self.mask is not None:
            nh *= self.mask
        return nh

    def nonlinear_rhs_hat(self, uh, p: ModelParams):
        """Fourier coefficients of ``-i P N(P u)``."""
        if self.moll is not None:
            uh = self.moll * uh
        nh = self.n_hat(np.fft.ifft(uh), p)
        if self.moll is not None:
            nh *= self.moll
        return -1j * nh


@lru_cache(maxsize=64)
def _ops(grid: GridSpec, p: ModelParams) -> _Operators:
    return _Operators(grid, p)


def _check(f: FieldState, p: ModelParams):
    if abs(f.rho - p.rho) > 1e-14 * p.rho:
        raise ValueError(f"state rho={f.rho} does not match params rho={p.rho}")


def nonlinearity(f: FieldState, p: ModelParams) -> FieldState:
    """``N(f) = i f (alpha + i beta T_delta) d_x |f|^2`` evaluated pseudo-spectrally."""
    _check(f, p)
    vals = np.fft.ifft(_ops(f.grid, p).n_hat(f.values, p))
    if not np.all(np.isfinite(vals)):
        raise StepFailure("non-finite value in nonlinearity")
    return f.with_values(vals)


def nonlinearity_split(f: FieldState, p: ModelParams) -> tuple[FieldState, FieldState]:
    """Split ``N = N_delta + N_inf`` with ``N_delta = -beta f L_delta |f|^2``.

    ``N_inf = i f (alpha + i beta H) d_x |f|^2``. For the Hilbert companion
    equation the ``N_delta`` piece is identically zero.
    """
    _check(f, p)
    ops = _ops(f.grid, p)
    u = f.values
    rh = ops.density_hat(u)
    d = np.fft.ifft(ops.ik * rh)
    h = np.fft.ifft(ops.hdx * rh)
    if p.nonlocal_op == "hilbert":
        nd = np.zeros_like(u)
    else:
        nd = -p.beta * u * np.fft.ifft(ops.ldelta * rh)
    ninf = u * (1j * p.alpha * d - p.beta * h)
    if ops.mask is not None:
        nd = np.fft.ifft(ops.mask * np.fft.fft(nd))
        ninf = np.fft.ifft(ops.mask * np.fft.fft(ninf))
    return f.with_values(nd), f.with_values(ninf)


def rhs_mollified(f: FieldState, p: ModelParams, part: str = "full") -> FieldState:
    """Time derivative ``-i (u_xx + P N(P u))``; ``part="nonlinear"`` drops ``-i u_xx``."""
    _check(f, p)
    ops = _ops(f.grid, p)
    uh = np.fft.fft(f.values)
    out = ops.nonlinear_rhs_hat(uh, p)
    if part == "full":
        out = out + ops.lin * uh
    elif part != "nonlinear":
        raise ValueError(f"part must be 'full' or 'nonlinear', got {part!r}")
    return f.with_values(np.fft.ifft(out))


def stability_dt(f: FieldState, p: ModelParams, c_nl: float = 0.05) -> float:
    """Default step ``c_nl * dx / (1 + max|u|^2)``.

    The linear part is exact, so only the one-derivative nonlinear coupling
    constrains the step; its bound ``0.5/xi_max`` is never the smaller one.
    """
    g = f.grid
    return min(0.5 / g.xi_max, c_nl * g.dx / (1.0 + float(np.max(np.abs(f.values)) ** 2)))


def _if_rk4(uh, dt, ops: _Operators, p: ModelParams, e_half, e_full):
    k1 = ops.nonlinear_rhs_hat(uh, p)
    k2 = ops.nonlinear_rhs_hat(e_half * (uh + 0.5 * dt * k1), p)
    k3 = ops.nonlinear_rhs_hat(e_half * uh + 0.5 * dt * k2, p)
    k4 = ops.nonlinear_rhs_hat(e_full * uh + dt * e_half * k3, p)
    return e_full * uh + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)


def step(f: FieldState, dt: float, p: ModelParams) -> FieldState:
    """One integrating-factor RK4 step."""
    _check(f, p)
    if not dt > 0:
        raise ValueError("dt must be positive")
    ops = _ops(f.grid, p)
    # overflow is detected explicitly below and reported as a step failure
    with np.errstate(over="ignore", invalid="ignore"):
        uh = _if_rk4(np.fft.fft(f.values), dt, ops, p, np.exp(0.5 * dt * ops.lin), np.exp(dt * ops.lin))
        vals = np.fft.ifft(uh)
    if not np.all(np.isfinite(vals)):
        raise StepFailure(f"non-finite values at t={f.time + dt:g}")
    return f.with_values(vals, time=f.time + dt)


def evolve(
    f0: FieldState,
    T: float,
    dt: float | str,
    p: ModelParams,
    record_every: int = 1,
    on_record: Optional[Callable[[FieldState], None]] = None,
) -> Trajectory:
    """Integrate to time ``f0.time + T``.

    The step is shrunk to ``T / ceil(T / dt)`` so that the final time is hit
    exactly. A step failure ends the run early; the returned trajectory keeps
    every record made so far and carries the failure message.
    """
    _check(f0, p)
    if not T > 0:
        raise ValueError("horizon T must be positive")
    if dt == "auto":
        dt = stability_dt(f0, p)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if int(record_every) != record_every or record_every < 1:
        raise ValueError("record_every must be a positive integer")
    nsteps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / nsteps
    ops = _ops(f0.grid, p)
    e_half, e_full = np.exp(0.5 * dt * ops.lin), np.exp(dt * ops.lin)
    traj = Trajectory([f0], p, dt, int(record_every))
    if on_record is not None:
        on_record(f0)
    uh = np.fft.fft(f0.values)
    t0 = f0.time
    for i in range(1, nsteps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            uh = _if_rk4(uh, dt, ops, p, e_half, e_full)
        if i % record_every == 0 or i == nsteps:
            vals = np.fft.ifft(uh)
            if not np.all(np.isfinite(vals)):
                traj.failure = f"non-finite values at step {i} (t={t0 + i * dt:g})"
                break
            s = f0.with_values(vals, time=t0 + i * dt)
            traj.states.append(s)
            if on_record is not None:
                on_record(s)
    return traj


def duhamel_residual(traj: Trajectory, free: bool = False) -> float:
    """Relative L2 defect of the mollified Duhamel formula at the final record.

    ``u(T) - U(T) u(0) + i * int_0^T U(T-s) P N(P u(s)) ds`` with composite
    Simpson quadrature over the records. ``free=True`` drops the nonlinear
    integral (checks ``u = U(t) u(0)``).
    """
    states = traj.states
    if len(states) < 5:
        raise ValueError("need at least 5 records for Simpson quadrature")
    t = traj.times
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
        raise ValueError("records are not uniformly spaced")
    if (len(states) - 1) % 2:
        raise ValueError("composite Simpson needs an even number of record intervals")
    grid = states[0].grid
    p = traj.params
    ops = _ops(grid, p)
    T = t[-1] - t[0]
    lin = ops.lin
    resid = np.fft.fft(states[-1].values) - np.exp(T * lin) * np.fft.fft(states[0].values)
    if not free:
        integrand = np.array(
            [np.exp((t[-1] - s.time) * lin) * ops.nonlinear_rhs_hat(np.fft.fft(s.values), p) for s in states]
        )
        # nonlinear_rhs_hat already carries the -i factor
        resid = resid - simpson(integrand, x=t, axis=0)
    num = np.sqrt(np.sum(np.abs(resid) ** 2))
    den = np.sqrt(np.sum(np.abs(np.fft.fft(states[-1].values)) ** 2))
    return float(num / den)


def _grey_profile(x, rho, theta, center, sign):
    c = math.cos(theta)
    return sign * c * np.tanh(rho * c * (x - center)) + 1j * math.sin(theta)


def make_initial_data(kind: str, grid: GridSpec, rho: float, **kw) -> FieldState:
    """Build a test datum.

    kinds
        ``constant``; ``plane_wave`` (``k``: wavenumber, ``k L / 2 pi`` integer);
        ``grey_pair`` (``theta``, ``x0``): two mirrored grey dips at ``+-x0``
        whose phase jumps cancel, so the product is periodic with tails at
        ``rho``; ``bump_perturbation`` (``amp``, ``width``, ``profile`` in
        ``{"gauss", "matern"}``, ``phase``); ``random_band`` (``seed``,
        ``band``, ``amp``).
    """
    x = grid.x
    if kind == "constant":
        vals = np.full(grid.n, rho, dtype=complex)
    elif kind == "plane_wave":
        k = kw.get("k", 1)
        modes = k * grid.length / (2 * np.pi)
        if abs(modes - round(modes)) > 1e-9:
            raise ValueError(f"wavenumber {k} is not periodic on a box of length {grid.length}")
        vals = rho * np.exp(1j * k * x)
    elif kind == "grey_pair":
        theta = kw.get("theta", 0.3)
        x0 = kw.get("x0", grid.length / 4)
        if not 0 < abs(theta) < np.pi / 2:
            raise ValueError("theta must satisfy 0 < |theta| < pi/2")
        a = _grey_profile(x, rho, theta, -x0, 1.0)
        b = _grey_profile(x, rho, theta, x0, -1.0)
        vals = -rho * a * b
        f = FieldState(grid, vals, rho)
        from .zhidkov import seam_gap  # local import: zhidkov depends on this module's peers only

        gap = seam_gap(f)
        if gap > kw.get("seam_tol", 1e-8):
            raise ValueError(f"box too small for grey pair: seam gap {gap:.3e}")
        return f
    elif kind == "bump_perturbation":
        amp = kw.get("amp", 0.2)
        width = kw.get("width", 1.0)
        profile = kw.get("profile", "gauss")
        phase = kw.get("phase", 0.0)
        r = np.abs(x - kw.get("center", 0.0)) / width
        if profile == "gauss":
            g = np.exp(-(r**2))
        elif profile == "matern":
            g = np.exp(-r) * (1.0 + r)
        else:
            raise ValueError(f"unknown bump profile {profile!r}")
        vals = rho * (1.0 + amp * np.exp(1j * phase) * g)
    elif kind == "random_band":
        seed = kw.get("seed", 0)
        band = kw.get("band", 4.0)
        amp = kw.get("amp", 0.1)
        rng = np.random.Generator(np.random.Philox(seed))
        xi = grid.wavenumbers
        sel = (np.abs(xi) <= band) & (xi != 0)
        coef = np.zeros(grid.n, dtype=complex)
        coef[sel] = rng.standard_normal(sel.sum()) + 1j * rng.standard_normal(sel.sum())
        pert = np.fft.ifft(coef)
        scale = np.max(np.abs(pert))
        vals = rho * (1.0 + amp * pert / scale) if scale > 0 else np.full(grid.n, rho, dtype=complex)
    else:
        raise ValueError(f"unknown initial-data kind {kind!r}")
    return FieldState(grid, vals, rho)
