"""Periodic grids, field states and Fourier-multiplier symbols.

Every linear operator used by the solver is diagonal in Fourier space, so it
is stored as a table of symbol values on the grid wavenumbers and applied with
one forward and one inverse FFT.

Conventions
-----------
The grid covers the box ``[-L/2, L/2)`` with ``x_j = -L/2 + j*dx``.
Wavenumbers are ``xi_k = 2*pi*k/L`` in FFT ordering with the Nyquist mode
carried as ``+n/2`` (so the set is ``{-n/2+1, ..., n/2}`` times ``2*pi/L``).
Composite symbols that are indeterminate at ``xi = 0`` take the value 0 there.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "GridSpec",
    "FieldState",
    "MultiplierSymbol",
    "make_grid",
    "lp_bump",
    "symbol_identity",
    "symbol_deriv",
    "symbol_hilbert",
    "symbol_hilbert_dx",
    "symbol_Tdelta_dx",
    "symbol_Ldelta",
    "symbol_propagator",
    "symbol_lp",
    "symbol_dealias",
    "apply_symbol",
    "apply_values",
    "deriv",
]


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Uniform periodic grid of ``n`` points on a box of length ``length``."""

    n: int
    length: float
    dx: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)
    wavenumbers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {n!r}")
        if not np.isfinite(self.length) or self.length <= 0:
            raise ValueError(f"box length must be positive, got {self.length!r}")
        dx = self.length / n
        k = np.fft.fftfreq(n, d=1.0 / n)
        k[n // 2] = n // 2
        xi = (2.0 * np.pi / self.length) * k
        x = -0.5 * self.length + dx * np.arange(n)
        for arr in (xi, x):
            arr.flags.writeable = False
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "wavenumbers", xi)

    def __eq__(self, other):
        if not isinstance(other, GridSpec):
            return NotImplemented
        return self.n == other.n and self.length == other.length

    def __hash__(self):
        return hash((self.n, self.length))

    @property
    def nyquist(self) -> int:
        return self.n // 2

    @property
    def xi_max(self) -> float:
        return np.pi * self.n / self.length

    @property
    def xi_min(self) -> float:
        """Smallest nonzero |wavenumber|."""
        return 2.0 * np.pi / self.length

    def integrate(self, values) -> complex | float:
        """Trapezoidal (periodic) quadrature ``dx * sum(values)``."""
        return self.dx * np.sum(values)

    def l2(self, values) -> float:
        return float(np.sqrt(self.dx * np.sum(np.abs(values) ** 2)))

    def sobolev(self, values, s: float) -> float:
        """Inhomogeneous ``H^s`` norm evaluated through Plancherel."""
        coef = np.fft.fft(values)
        weight = (1.0 + self.wavenumbers**2) ** s
        return float(np.sqrt(self.length / self.n**2 * np.sum(weight * np.abs(coef) ** 2)))


def make_grid(n: int, length: float) -> GridSpec:
    return GridSpec(n, length)


@dataclass(frozen=True, eq=False)
class FieldState:
    """Complex samples of ``u(., t)`` on a grid, with background level ``rho``."""

    grid: GridSpec
    values: np.ndarray
    rho: float
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {vals.shape}")
        if not self.rho > 0:
            raise ValueError(f"background level rho must be positive, got {self.rho!r}")
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("field contains non-finite samples")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "time", float(self.time))

    def with_values(self, values, time: float | None = None) -> "FieldState":
        return replace(self, values=values, time=self.time if time is None else time)


@dataclass(frozen=True, eq=False)
class MultiplierSymbol:
    """Fourier multiplier stored as one value per grid wavenumber."""

    grid: GridSpec
    values: np.ndarray
    tag: str

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"symbol needs {self.grid.n} values, got shape {vals.shape}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __mul__(self, other: "MultiplierSymbol") -> "MultiplierSymbol":
        if not isinstance(other, MultiplierSymbol):
            return NotImplemented
        if other.grid != self.grid:
            raise ValueError("symbols live on different grids")
        return MultiplierSymbol(self.grid, self.values * other.values, f"{self.tag}*{other.tag}")

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or not np.any(np.imag(self.values))


def symbol_identity(grid: GridSpec) -> MultiplierSymbol:
    return MultiplierSymbol(grid, np.ones(grid.n), "identity")


def symbol_deriv(grid: GridSpec, k: int) -> MultiplierSymbol:
    """Symbol ``(i xi)^k`` of the k-th derivative.

    The Nyquist entry is zeroed for odd ``k`` so real fields stay real.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"derivative order must be a positive integer, got {k!r}")
    k = int(k)
    vals = (1j * grid.wavenumbers) ** k
    if k % 2 == 1:
        vals[grid.nyquist] = 0.0
    else:
        vals = vals.real
    return MultiplierSymbol(grid, vals, f"deriv({k})")


def symbol_hilbert(grid: GridSpec) -> MultiplierSymbol:
    """Hilbert transform, ``-i sgn(xi)``; zero at ``xi = 0`` and at Nyquist."""
    vals = -1j * np.sign(grid.wavenumbers)
    vals[grid.nyquist] = 0.0
    return MultiplierSymbol(grid, vals, "hilbert")


def symbol_hilbert_dx(grid: GridSpec) -> MultiplierSymbol:
    """``H d/dx`` with the even symbol ``|xi|``."""
    return MultiplierSymbol(grid, np.abs(grid.wavenumbers), "hilbert_dx")


def _check_delta(delta: float) -> float:
    if not np.isfinite(delta) or delta <= 0:
        raise ValueError(f"depth delta must be positive, got {delta!r}")
    return float(delta)


def _rdelta(xi: np.ndarray, delta: float) -> np.ndarray:
    # |xi| (coth(delta|xi|) - 1) = 2|xi| / expm1(2 delta |xi|), free of cancellation
    a = np.abs(xi)
    out = np.zeros_like(a)
    nz = a > 0
    with np.errstate(over="ignore"):
        # overflow gives inf and hence the correct limit 0
        out[nz] = 2.0 * a[nz] / np.expm1(2.0 * delta * a[nz])
    return out


def symbol_Tdelta_dx(grid: GridSpec, delta: float) -> MultiplierSymbol:
    """``T_delta d/dx`` with symbol ``xi coth(delta xi)``, set to 0 at ``xi = 0``."""
    delta = _check_delta(delta)
    xi = grid.wavenumbers
    vals = np.abs(xi) + _rdelta(xi, delta)
    return MultiplierSymbol(grid, vals, "Tdelta_dx")


def symbol_Ldelta(grid: GridSpec, delta: float) -> MultiplierSymbol:
    """``(T_delta - H) d/dx``, symbol ``(coth(delta xi) - sgn xi) xi`` in ``[0, 1/delta)``."""
    delta = _check_delta(delta)
    return MultiplierSymbol(grid, _rdelta(grid.wavenumbers, delta), "Ldelta")


def symbol_propagator(grid: GridSpec, t: float) -> MultiplierSymbol:
    """Free Schrodinger group ``U(t) = exp(-i t d_x^2)``, symbol ``exp(i t xi^2)``."""
    if not np.isfinite(t):
        raise ValueError("propagator time must be finite")
    return MultiplierSymbol(grid, np.exp(1j * t * grid.wavenumbers**2), f"propagator({t:g})")


def _h(s):
    out = np.zeros_like(s, dtype=float)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def lp_bump(xi) -> np.ndarray:
    """Smooth cutoff: 1 on ``|xi| <= 1``, 0 on ``|xi| >= 2``, C-infinity between."""
    a = np.abs(np.asarray(xi, dtype=float))
    out = np.where(a <= 1.0, 1.0, 0.0)
    mid = (a > 1.0) & (a < 2.0)
    if np.any(mid):
        am = a[mid]
        up, down = _h(2.0 - am), _h(am - 1.0)
        out[mid] = up / (up + down)
    return out


def symbol_lp(grid: GridSpec, level: int, kind: str = "at_most") -> MultiplierSymbol:
    """Littlewood-Paley multipliers at dyadic level ``level`` (physical wavenumber ``2**level``).

    ``kind="at_most"`` gives ``P_{<=l}``; ``kind="block"`` gives
    ``P_l = P_{<=l} - P_{<=l-1}`` (and ``P_0 = P_{<=0}``).
    """
    if int(level) != level or level < 0:
        raise ValueError(f"Littlewood-Paley level must be a nonnegative integer, got {level!r}")
    level = int(level)
    xi = grid.wavenumbers
    le = lp_bump(xi / 2.0**level)
    if kind == "at_most":
        return MultiplierSymbol(grid, le, f"lp_le({level})")
    if kind == "block":
        if level > 0:
            le = le - lp_bump(xi / 2.0 ** (level - 1))
        return MultiplierSymbol(grid, le, f"lp_block({level})")
    raise ValueError(f"unknown Littlewood-Paley kind {kind!r}")


def symbol_dealias(grid: GridSpec) -> MultiplierSymbol:
    """Two-thirds rule: keep modes with ``|k| < n/3``."""
    k = np.abs(grid.wavenumbers) / grid.xi_min
    return MultiplierSymbol(grid, (k < grid.n / 3.0).astype(float), "dealias")


def apply_values(grid: GridSpec, values: np.ndarray, symbol) -> np.ndarray:
    """Apply a symbol (or raw symbol array) to raw samples on ``grid``."""
    sv = symbol.values if isinstance(symbol, MultiplierSymbol) else symbol
    return np.fft.ifft(sv * np.fft.fft(values))


def apply_symbol(f: FieldState, s: MultiplierSymbol) -> FieldState:
    if f.grid != s.grid:
        raise ValueError("field and symbol are defined on different grids")
    return f.with_values(apply_values(f.grid, f.values, s))


def deriv(grid: GridSpec, values: np.ndarray, k: int = 1) -> np.ndarray:
    """Spectral k-th derivative of raw samples."""
    return apply_values(grid, values, symbol_deriv(grid, k))
