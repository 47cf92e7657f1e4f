"""Transform-free reference computations for the nonlocal operator.

Two independent pipelines evaluate ``T_delta f`` for a function on the line:

* :func:`kernel_Tdelta_pv` sums the ``coth`` kernel directly on the sample
  lattice, realizing the principal value by excluding the singular node;
* :func:`line_multiplier_Tdelta` integrates the symbol ``-i coth(delta xi)``
  against a directly computed Fourier transform.

Neither touches the FFT, so agreement between them and with the grid
multipliers in :mod:`ginls.spectral` is a genuine cross-check.

Fourier convention: ``F f(xi) = int f(x) exp(-i x xi) dx``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad, quad_vec

from .spectral import apply_values, symbol_Tdelta_dx

__all__ = [
    "LineSampledFunction",
    "QuadratureError",
    "sample_line_function",
    "lattice_points",
    "kernel_Tdelta_pv",
    "kernel_hilbert_pv",
    "line_multiplier_Tdelta",
    "line_multiplier_hilbert",
    "grid_vs_line_Tdelta_dx",
    "tanh_fourier_check",
    "cosech_fourier_check",
    "coth_fourier_check",
    "hyperbolic_identity_suite",
    "oracle_corpus",
]

NEGLIGIBLE = 1e-14

# central 8th-order first-derivative stencil, offsets 1..4
_FD8 = np.array([4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0])


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True, eq=False)
class LineSampledFunction:
    """Samples of a function on a uniform symmetric lattice ``[-R, R]``."""

    nodes: np.ndarray
    values: np.ndarray
    support_radius: float

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if x.ndim != 1 or x.shape != v.shape or x.size < 16:
            raise ValueError("nodes and values must be matching 1-D arrays with at least 16 entries")
        h = np.diff(x)
        if np.any(h <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
            raise ValueError("nodes must be uniformly spaced")
        if abs(x[0] + x[-1]) > 1e-9 * h[0]:
            raise ValueError("nodes must lie on a symmetric interval [-R, R]")
        if not self.support_radius < x[-1]:
            raise ValueError(
                f"support radius {self.support_radius:g} is not inside the window R={x[-1]:g}"
            )
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @property
    def radius(self) -> float:
        return float(self.nodes[-1])

    def derivative(self) -> np.ndarray:
        """Eighth-order central differences (zero padding beyond the window)."""
        v = np.concatenate([np.zeros(4, complex), self.values, np.zeros(4, complex)])
        n = self.values.size
        out = np.zeros(n, complex)
        for m, c in enumerate(_FD8, start=1):
            out += c * (v[4 + m : 4 + m + n] - v[4 - m : 4 - m + n])
        return out / self.h


def sample_line_function(func: Callable, radius: float, h: float) -> LineSampledFunction:
    """Sample ``func`` on ``[-radius, radius]`` with spacing close to ``h``."""
    if not radius > 0 or not h > 0:
        raise ValueError("radius and spacing must be positive")
    m = int(math.ceil(radius / h))
    x = np.linspace(-radius, radius, 2 * m + 1)
    v = np.asarray(func(x), dtype=complex)
    big = np.nonzero(np.abs(v) >= NEGLIGIBLE)[0]
    r = 0.0 if big.size == 0 else float(np.max(np.abs(x[big])))
    return LineSampledFunction(x, v, r)


def lattice_points(f: LineSampledFunction, x) -> np.ndarray:
    """Nodes nearest to ``x``: the points where the kernel sums are actually evaluated."""
    return f.nodes[_snap(f, x, margin=4)]


def _snap(f: LineSampledFunction, x, margin: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = np.rint((x - f.nodes[0]) / f.h).astype(int)
    if np.any(idx < margin) or np.any(idx > f.nodes.size - 1 - margin):
        raise ValueError(f"evaluation points must stay {margin} nodes inside the window")
    return idx


def _pv_sum(f: LineSampledFunction, x, kernel: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Punctured trapezoid sum plus the node-exclusion correction.

    Pairing nodes at ``x -+ m h`` turns the p.v. integral into a trapezoid
    sum over the even, smooth function ``K(s)(f(x-s) - f(x+s))`` on
    ``s > 0``; its ``s = 0`` value is ``-2 f'(x) / pi``, which carries weight
    ``h / 2``. That term is added back explicitly.
    """
    idx = _snap(f, x, margin=4)
    y, v, h = f.nodes, f.values, f.h
    dv = f.derivative()
    out = np.empty(idx.size, dtype=complex)
    for q, i in enumerate(idx):
        s = y[i] - y
        s[i] = 1.0
        k = kernel(s)
        k[i] = 0.0
        out[q] = h * np.sum(k * v) - h * dv[i] / np.pi
    return out


def kernel_Tdelta_pv(f: LineSampledFunction, delta: float, x) -> np.ndarray:
    """``(1/2 delta) p.v. int coth(pi (x - y) / 2 delta) f(y) dy`` at lattice points nearest ``x``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    c = np.pi / (2.0 * delta)
    return _pv_sum(f, x, lambda s: 1.0 / (2.0 * delta * np.tanh(c * s)))


def kernel_hilbert_pv(f: LineSampledFunction, x) -> np.ndarray:
    """``(1/pi) p.v. int f(y) / (x - y) dy`` by the same lattice rule."""
    return _pv_sum(f, x, lambda s: 1.0 / (np.pi * s))


def _fourier_direct(f: LineSampledFunction, xi: np.ndarray) -> np.ndarray:
    """``F f(xi)`` by the trapezoid rule on the samples (no FFT)."""
    return f.h * np.exp(-1j * np.outer(xi, f.nodes)) @ f.values


def _spectral_cutoff(f: LineSampledFunction, tol: float) -> float:
    """Largest ``|xi|`` below the lattice band where ``|F f|`` still exceeds ``tol``."""
    band = np.pi / f.h
    xi = np.linspace(0.0, band, 2049)
    a = np.maximum(np.abs(_fourier_direct(f, xi)), np.abs(_fourier_direct(f, -xi)))
    big = np.nonzero(a > tol * max(a[0], 1e-300))[0]
    top = xi[big[-1]] if big.size else xi[1]
    if top > 0.9 * band:
        raise QuadratureError("function is under-resolved by its lattice (spectrum reaches the band edge)")
    return float(min(band, 1.25 * top + 1.0))


def _line_multiplier(f, x, sym_over_xi: Callable, pole: float, tol: float) -> np.ndarray:
    # sym(xi) = pole / xi + sym_over_xi(xi) on xi > 0, with sym odd
    x = np.atleast_1d(np.asarray(x, dtype=float))
    top = _spectral_cutoff(f, 1e-13)

    def integrand(xi):
        fp = _fourier_direct(f, np.array([xi]))[0]
        fm = _fourier_direct(f, np.array([-xi]))[0]
        # folded odd combination, finite as xi -> 0
        odd = fp * np.exp(1j * x * xi) - fm * np.exp(-1j * x * xi)
        return -1j * (pole / xi + sym_over_xi(xi)) * odd

    val, err = quad_vec(integrand, 0.0, top, epsabs=tol, epsrel=tol, limit=2000)
    if not np.isfinite(err) or err > 100 * tol * max(1.0, float(np.max(np.abs(val)))):
        raise QuadratureError(f"line-Fourier quadrature error estimate {err:.2e} exceeds tolerance")
    return val / (2.0 * np.pi)


def line_multiplier_Tdelta(f: LineSampledFunction, delta: float, x, tol: float = 1e-11) -> np.ndarray:
    """``(1/2 pi) int exp(i x xi) (-i coth(delta xi)) F f(xi) d xi`` by adaptive quadrature.

    The ``1/(delta xi)`` part of ``coth`` is paired across ``+-xi`` so that the
    principal value becomes an ordinary integral of a bounded integrand.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")

    def rest(xi):
        y = delta * xi
        if y < 1e-4:
            return (y / 3.0 - y**3 / 45.0)
        return 1.0 / math.tanh(y) - 1.0 / y

    return _line_multiplier(f, x, rest, 1.0 / delta, tol)


def line_multiplier_hilbert(f: LineSampledFunction, x, tol: float = 1e-11) -> np.ndarray:
    """Same pipeline with ``coth(delta xi)`` replaced by ``sgn(xi)``."""
    return _line_multiplier(f, x, lambda xi: 1.0, 0.0, tol)


def grid_vs_line_Tdelta_dx(
    func: Callable, dfunc: Callable, delta: float, n: int, length: float, x_eval, refine: int = 4
) -> dict:
    """Compare the grid multiplier ``T_delta d_x`` with the kernel oracle applied to ``f'``.

    Returns the raw difference and the difference after removing the expected
    constant offset ``(1/delta) * mean(f)``, which comes from the grid's zero
    mode convention (the line symbol tends to ``1/delta`` at ``xi = 0``).
    """
    from .spectral import make_grid

    grid = make_grid(n, length)
    vals = np.asarray(func(grid.x), dtype=complex)
    out = apply_values(grid, vals, symbol_Tdelta_dx(grid, delta))
    xe = np.atleast_1d(np.asarray(x_eval, dtype=float))
    idx = np.rint((xe - grid.x[0]) / grid.dx).astype(int)
    if np.any(np.abs(grid.x[idx] - xe) > 1e-12 * length):
        raise ValueError("evaluation points must be grid nodes")
    # line lattice of spacing dx/refine that contains every grid node
    h = grid.dx / refine
    g = sample_line_function(dfunc, 0.5 * length - h, h)
    if np.any(np.abs(lattice_points(g, xe) - xe) > 1e-9 * h):
        raise ValueError("evaluation points are not on the line lattice")
    line = kernel_Tdelta_pv(g, delta, xe)
    offset = grid.integrate(vals) / length / delta
    raw = out[idx] - line
    return {
        "grid": out[idx],
        "line": line,
        "expected_offset": complex(offset),
        "raw_diff": raw,
        "corrected_diff": raw + offset,
    }


# -- Fourier transforms of the hyperbolic kernels --------------------------


def _reject_small(xi: float):
    if not np.isfinite(xi) or abs(xi) < 1e-3:
        raise ValueError(f"|xi| must be at least 1e-3 (principal-value regime), got {xi!r}")


def _sin_transform(func: Callable, xi: float) -> float:
    # int_0^inf func(x) sin(x xi) dx for decaying func (QAWF)
    with warnings.catch_warnings():
        # QAWF flags slow cycles near the 1e-13 floor; the error estimate is checked below
        warnings.simplefilter("ignore")
        val, err = quad(func, 0.0, np.inf, weight="sin", wvar=abs(xi), limlst=200, epsabs=1e-13)
    if not np.isfinite(val) or err > 1e-8:
        raise QuadratureError(f"sine transform error estimate {err:.2e}")
    return math.copysign(1.0, xi) * val


def tanh_fourier_check(xi: float) -> tuple[complex, complex]:
    """``F[tanh(x/2)](xi)`` numerically and as ``-2 i pi cosech(pi xi)``.

    ``tanh(x/2)`` is odd, so ``F = -2i int_0^inf tanh(x/2) sin(x xi) dx``;
    the constant tail is removed with the Abel value
    ``int_0^inf sin(x xi) dx = 1/xi``.
    """
    _reject_small(xi)
    # tanh(x/2) - 1 = -2 / (e^x + 1)
    core = _sin_transform(lambda x: -2.0 / (math.exp(x) + 1.0) if x < 700 else 0.0, xi)
    numeric = -2j * (core + 1.0 / xi)
    closed = -2j * np.pi / math.sinh(np.pi * xi)
    return complex(numeric), complex(closed)


def _cosech_minus_inv(x: float) -> float:
    if x < 1e-2:
        x2 = x * x
        return x * (-1.0 / 6.0 + x2 * (7.0 / 360.0 - x2 * 31.0 / 15120.0))
    if x > 700:
        return -1.0 / x
    return 1.0 / math.sinh(x) - 1.0 / x


def cosech_fourier_check(xi: float) -> tuple[complex, complex]:
    """``F[p.v. cosech](xi)`` numerically and as ``-i pi tanh(pi xi / 2)``.

    ``cosech(x) = 1/x + (cosech(x) - 1/x)``; the ``1/x`` part contributes
    ``(pi/2) sgn(xi)`` to the sine integral.
    """
    _reject_small(xi)
    core = _sin_transform(_cosech_minus_inv, xi)
    numeric = -2j * (core + 0.5 * np.pi * math.copysign(1.0, xi))
    closed = -1j * np.pi * math.tanh(0.5 * np.pi * xi)
    return complex(numeric), complex(closed)


def coth_fourier_check(xi: float) -> tuple[complex, complex]:
    """``F[p.v. coth](xi)`` assembled as ``F[tanh(x/2)] + F[p.v. cosech]``.

    Closed form ``-i pi coth(pi xi / 2)``. Also checks that the two closed
    forms add up to it, i.e. ``2 cosech(2y) + tanh(y) = coth(y)``.
    """
    n1, c1 = tanh_fourier_check(xi)
    n2, c2 = cosech_fourier_check(xi)
    closed = -1j * np.pi / math.tanh(0.5 * np.pi * xi)
    if abs((c1 + c2) - closed) > 1e-12 * abs(closed):
        raise ArithmeticError("closed-form pieces do not sum to the coth transform")
    return complex(n1 + n2), complex(closed)


def hyperbolic_identity_suite(x: float) -> tuple[float, float]:
    """Scaled residuals of ``coth = tanh(x/2) + cosech`` and ``cosech + coth = coth(x/2)``.

    Each residual is divided by ``max(1, largest |term|)``.
    """
    if x == 0 or not np.isfinite(x):
        raise ValueError("x must be a nonzero finite real")
    cth, csch = 1.0 / math.tanh(x), 1.0 / math.sinh(x)
    th2, cth2 = math.tanh(0.5 * x), 1.0 / math.tanh(0.5 * x)
    r1 = abs(cth - th2 - csch) / max(1.0, abs(cth), abs(th2), abs(csch))
    r2 = abs(csch + cth - cth2) / max(1.0, abs(cth), abs(csch), abs(cth2))
    return r1, r2


# -- corpus -----------------------------------------------------------------


def _bump(x, a=4.0):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < a
    t = x[inside] / a
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t * t))
    return out


def _dbump(x, a=4.0):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < a
    t = x[inside] / a
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t * t)) * (-2.0 * t / (1.0 - t * t) ** 2) / a
    return out


def oracle_corpus() -> dict:
    """Reference functions ``name -> (f, f')`` used by the operator cross-checks."""
    return {
        "gauss": (lambda x: np.exp(-np.asarray(x) ** 2), lambda x: -2 * np.asarray(x) * np.exp(-np.asarray(x) ** 2)),
        "shifted_gauss": (
            lambda x: np.exp(-((np.asarray(x) - 0.5) ** 2) / 0.8),
            lambda x: -2.5 * (np.asarray(x) - 0.5) * np.exp(-((np.asarray(x) - 0.5) ** 2) / 0.8),
        ),
        "bump": (_bump, _dbump),
    }
