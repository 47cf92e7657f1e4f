"""Zhidkov-space size functional, distance and frequency envelopes on the grid.

Sobolev norms use the weight ``(1 + xi^2)^s`` with Plancherel-exact
normalization; ``L^inf`` is the maximum modulus over grid points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import FieldState, GridSpec, apply_values, lp_bump, symbol_deriv

__all__ = [
    "EnvelopeSequence",
    "MetricsReport",
    "SEAM_FRACTION",
    "energy_Ek",
    "dist_dk",
    "sq_dev",
    "linf",
    "dx_norm",
    "seam_gap",
    "seam_check",
    "metrics",
    "envelope_levels",
    "block_norms",
    "freq_envelope",
    "envelope_ratio_constant",
    "lp_kernel_l1",
    "envelope_e3_constant",
]

SEAM_FRACTION = 0.10


def _same(f: FieldState, g: FieldState):
    if f.grid != g.grid:
        raise ValueError("states live on different grids")
    if f.rho != g.rho:
        raise ValueError("states have different background levels")


def _dx(f: FieldState) -> np.ndarray:
    return apply_values(f.grid, f.values, symbol_deriv(f.grid, 1))


def linf(f: FieldState) -> float:
    return float(np.max(np.abs(f.values)))


def sq_dev(f: FieldState) -> float:
    """``|| |f|^2 - rho^2 ||_{L^2}``."""
    return f.grid.l2(np.abs(f.values) ** 2 - f.rho**2)


def dx_norm(f: FieldState, k: int = 1) -> float:
    """``|| d_x f ||_{H^{k-1}}``."""
    return f.grid.sobolev(_dx(f), k - 1)


def energy_Ek(f: FieldState, k: int) -> float:
    """``||d_x f||^2_{H^{k-1}} + ||f||^2_{L^inf} + || |f|^2 - rho^2 ||_{L^2}``."""
    if int(k) != k or k < 1:
        raise ValueError(f"order k must be a positive integer, got {k!r}")
    return dx_norm(f, k) ** 2 + linf(f) ** 2 + sq_dev(f)


def dist_dk(f: FieldState, g: FieldState, k: int) -> float:
    """``||d_x(f-g)||_{H^{k-1}} + ||f-g||_{L^inf} + || |f|^2 - |g|^2 ||_{L^2}``."""
    if int(k) != k or k < 1:
        raise ValueError(f"order k must be a positive integer, got {k!r}")
    _same(f, g)
    grid = f.grid
    diff = f.values - g.values
    d = grid.sobolev(apply_values(grid, diff, symbol_deriv(grid, 1)), k - 1)
    return d + float(np.max(np.abs(diff))) + grid.l2(np.abs(f.values) ** 2 - np.abs(g.values) ** 2)


def _seam_mask(grid: GridSpec) -> np.ndarray:
    # outer 10% of the points: 5% at each end of the box
    m = max(1, int(round(0.5 * SEAM_FRACTION * grid.n)))
    mask = np.zeros(grid.n, dtype=bool)
    mask[:m] = True
    mask[-m:] = True
    return mask


def seam_gap(f: FieldState) -> float:
    """``max | |f| - rho |`` over the outer 10% of the box."""
    return float(np.max(np.abs(np.abs(f.values[_seam_mask(f.grid)]) - f.rho)))


def seam_check(f: FieldState, tol: float = 1e-6) -> bool:
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    return seam_gap(f) <= tol


@dataclass(frozen=True)
class MetricsReport:
    E1: float
    E2: float
    Ek: float
    k: int
    linf: float
    sq_dev: float
    seam_gap: float


def metrics(f: FieldState, k: int = 2) -> MetricsReport:
    return MetricsReport(
        E1=energy_Ek(f, 1),
        E2=energy_Ek(f, 2),
        Ek=energy_Ek(f, max(k, 2)),
        k=max(k, 2),
        linf=linf(f),
        sq_dev=sq_dev(f),
        seam_gap=seam_gap(f),
    )


# -- frequency envelopes -----------------------------------------------------


def envelope_levels(grid: GridSpec) -> int:
    """Top dyadic level ``J`` with ``2**J >= xi_max``, so ``P_{<=J}`` is the identity."""
    return max(0, math.ceil(math.log2(grid.xi_max)))


def block_norms(f: FieldState, s: float = 1.0, of_derivative: bool = True) -> np.ndarray:
    """``||P_j d_x f||_{H^s}`` (or ``||P_j f||_{H^s}``) for ``j = 0..J``."""
    grid = f.grid
    xi = grid.wavenumbers
    coef = np.fft.fft(f.values)
    if of_derivative:
        coef = coef * symbol_deriv(grid, 1).values
    w = (1.0 + xi**2) ** s * np.abs(coef) ** 2
    out = []
    prev = np.zeros(grid.n)
    for j in range(envelope_levels(grid) + 1):
        le = lp_bump(xi / 2.0**j)
        blk = le - prev
        prev = le
        out.append(math.sqrt(grid.length / grid.n**2 * np.sum(blk**2 * w)))
    return np.array(out)


@dataclass(frozen=True)
class EnvelopeSequence:
    eps: float
    values: np.ndarray
    block_norms: np.ndarray

    @property
    def j_max(self) -> int:
        return len(self.values) - 1


def freq_envelope(f: FieldState, eps: float = 0.5) -> EnvelopeSequence:
    """``c_j = sum_k 2^{-eps|j-k|} ||P_k d_x f||_{H^1} + 2^{-eps j}(||f||_inf + ||\\,|f|^2-rho^2||^{1/2})``."""
    if not 0 < eps < 1:
        raise ValueError(f"envelope exponent must lie in (0, 1), got {eps!r}")
    a = block_norms(f)
    j = np.arange(len(a))
    kern = 2.0 ** (-eps * np.abs(j[:, None] - j[None, :]))
    tail = 2.0 ** (-eps * j) * (linf(f) + math.sqrt(sq_dev(f)))
    return EnvelopeSequence(eps, kern @ a + tail, a)


def envelope_ratio_constant(eps: float) -> float:
    """``C`` with ``1/C <= ||c||^2 / E^2 <= C``.

    Here ``E = E^2_rho(f)``. Upper side: discrete Young with
    ``S = sum_m 2^{-eps|m|}``, the tail weight ``W^2 = sum_j 4^{-eps j}`` and
    ``b^2 <= 2 (||f||_inf^2 + || |f|^2 - rho^2 ||)``, giving ``2 S^2 + 4 W^2``.
    Lower side: ``c_j^2 >= a_j^2 + 4^{-eps j} b^2`` and at most two blocks
    overlap, giving 2.
    """
    q = 2.0**-eps
    s = (1 + q) / (1 - q)
    w2 = 1.0 / (1 - q * q)
    return max(2.0, 2.0 * s * s + 4.0 * w2)


def lp_kernel_l1(grid: GridSpec, level: int) -> float:
    """Discrete ``l^1`` norm of the ``P_{<=level}`` convolution kernel (sup-norm gain)."""
    kern = np.fft.ifft(lp_bump(grid.wavenumbers / 2.0**level))
    return float(np.sum(np.abs(kern)))


def envelope_e3_constant(grid: GridSpec, j: int, eps: float) -> float:
    """Explicit ``C`` with ``E^3(P_{<=j} f)^{1/2} <= C 2^j c_j[f]``.

    Derivative part: blocks ``k <= j+1`` each gain at most ``sqrt(1 + 4^{k+1})``
    and ``c_k <= 2^{eps|k-j|} c_j``. Sup part: kernel ``l^1`` norm ``Lam`` and
    ``||f||_inf <= 2^{eps j} c_j``. Square-deviation part: ``s <= 4^{eps j} c_j^2``
    plus ``(Lam + 1) ||f||_inf ||P_{>j} f||``, with
    ``||P_{>j} f|| <= sum_{k>j} 2^{1-k} c_k``.
    """
    lam = lp_kernel_l1(grid, j)
    k = np.arange(0, j + 2)
    a = np.sum(np.sqrt(1.0 + 4.0 ** (k + 1)) * 2.0 ** (eps * np.abs(k - j))) / 2.0**j
    q = 2.0 ** (eps - 1.0)
    tail = 2.0 * q / (1.0 - q)
    c2 = a * a + lam * lam + 1.0 + (lam + 1.0) * tail
    return math.sqrt(c2)
