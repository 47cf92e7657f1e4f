"""Modified energies, hierarchy diagnostics and local identity checkers.

All densities are built from the same spectral derivatives and periodic
quadrature as the solver, so drift measured along a trajectory isolates the
time-stepping error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ModelParams, Trajectory
from .spectral import FieldState, symbol_hilbert_dx, symbol_Tdelta_dx

__all__ = [
    "Densities",
    "FunctionalReport",
    "functional_H1",
    "functional_H2",
    "functional_H2_inls",
    "correctors_H1",
    "correctors_H2",
    "renormalized_mass",
    "hierarchy_E",
    "functional_report",
    "tderiv_identity_residuals",
    "tderiv_identity_rates",
    "imim_identity_sides",
    "imim_identity_residual",
    "coercivity_lower_bound",
    "linf_from_h1",
    "apriori_E1_bound",
    "h2_growth_constant",
    "h2_envelope",
]


class Densities:
    """Pointwise building blocks of one state, computed once and reused."""

    def __init__(self, f: FieldState, p: Optional[ModelParams] = None):
        g = f.grid
        self.grid = g
        self.rho = f.rho
        self._ik = 1j * g.wavenumbers
        self._ik[g.nyquist] = 0.0
        if p is None or p.nonlocal_op == "tdelta":
            self._tdx = symbol_Tdelta_dx(g, 1.0 if p is None else p.delta).values
        else:
            self._tdx = symbol_hilbert_dx(g).values
        u = f.values
        uh = np.fft.fft(u)
        self.u = u
        self.ux = np.fft.ifft(self._ik * uh)
        self.uxx = np.fft.ifft((1j * g.wavenumbers) ** 2 * uh)
        self.uxxx = np.fft.ifft(self._ik**3 * uh)
        self.s = np.abs(u) ** 2
        self.g = self.s - f.rho**2
        self.J = np.imag(np.conj(u) * self.ux)
        self.ux2 = np.abs(self.ux) ** 2
        self.uxx2 = np.abs(self.uxx) ** 2

    def d(self, v, k: int = 1) -> np.ndarray:
        """Real spectral derivative of a real density."""
        return np.real(np.fft.ifft(self._ik**k * np.fft.fft(v)))

    def tdx(self, v) -> np.ndarray:
        """``T_delta d_x`` applied to a real density (zero mode ignored)."""
        return np.real(np.fft.ifft(self._tdx * np.fft.fft(v)))

    def tdxk(self, v, k: int) -> np.ndarray:
        """``T_delta d_x^k`` for ``k >= 1``."""
        return np.real(np.fft.ifft(self._tdx * self._ik ** (k - 1) * np.fft.fft(v)))

    def integral(self, v) -> float:
        return float(np.real(self.grid.integrate(v)))


def _dens(f: FieldState, p: ModelParams) -> Densities:
    return Densities(f, p)


def correctors_H1(f: FieldState, p: ModelParams, D: Optional[Densities] = None) -> tuple[float, ...]:
    """``(I_1^(1), ..., I_1^(4))``."""
    D = D or _dens(f, p)
    g = D.g
    return (
        D.integral(g * D.J),
        D.integral(g * D.tdx(g)),
        D.integral(g**3),
        D.integral(g**2),
    )


def functional_H1(f: FieldState, p: ModelParams, D: Optional[Densities] = None) -> float:
    D = D or _dens(f, p)
    a, b, rho2 = p.alpha, p.beta, f.rho**2
    g = D.g
    dens = D.ux2 + a * g * D.J + 0.5 * b * g * D.tdx(g) + a * a * (D.s / 3.0 + rho2 / 6.0) * g**2
    return D.integral(dens)


def correctors_H2(f: FieldState, p: ModelParams, D: Optional[Densities] = None) -> tuple[float, ...]:
    """``(I_2^(1), ..., I_2^(5))``."""
    D = D or _dens(f, p)
    s2 = D.d(D.s, 2)
    tg = D.tdx(D.g)
    return (
        D.integral(D.ux2 * D.J),
        D.integral(s2 * D.J),
        D.integral(D.ux2 * tg),
        D.integral(s2 * tg),
        D.integral(D.J * D.tdx(D.J)),
    )


def functional_H2(f: FieldState, p: ModelParams, D: Optional[Densities] = None) -> float:
    D = D or _dens(f, p)
    i1, i2, i3, i4, i5 = correctors_H2(f, p, D)
    a, b = p.alpha, p.beta
    return D.integral(D.uxx2) + 2 * a * i1 - 3 * a * i2 + 2 * b * i3 - 0.75 * b * i4 + b * i5


def functional_H2_inls(f: FieldState, p: ModelParams, D: Optional[Densities] = None) -> float:
    """Exact second-order conserved quantity of the integrable case ``beta = +-|alpha|``."""
    if not p.integrable:
        raise ValueError(f"H2_inls needs beta = +-|alpha| != 0, got alpha={p.alpha}, beta={p.beta}")
    D = D or _dens(f, p)
    a, b = p.alpha, p.beta
    rho2 = f.rho**2
    s, g, J = D.s, D.g, D.J
    tg = D.tdx(g)
    q = s * s - rho2 * rho2
    tq = D.tdx(q)
    dens = (
        2 * a * a * s * s * D.ux2
        + a * a * s * (1.5 * D.d(s) ** 2 + 0.5 * tg**2)
        + a * b * J * (2 * s * tg + tq)
        + a * a * (s**3 - rho2**3) * (a * J + (2.0 / 3.0) * b * tg)
        + 0.25 * a * a * b * q * tq
        + a**4 * (s**3 / 5 + 0.4 * rho2 * s * s + 0.6 * rho2 * rho2 * s + 0.3 * rho2**3) * g * g
    )
    return functional_H2(f, p, D) + D.integral(dens)


def renormalized_mass(f: FieldState) -> float:
    """``int (|f|^2 - rho^2) dx``."""
    return float(f.grid.integrate(np.abs(f.values) ** 2 - f.rho**2))


def hierarchy_E(f: FieldState, p: ModelParams, n: float) -> float:
    """Box evaluation of the integrable hierarchy ``E_0 ... E_2`` (diagnostic only)."""
    D = _dens(f, p)
    s, J = D.s, D.J
    if n == 0:
        dens = s
    elif n == 0.5:
        dens = J + 0.5 * s * s
    elif n == 1:
        dens = D.ux2 + s * J + 0.5 * s * D.tdx(s) + s**3 / 3
    elif n == 1.5:
        ts = D.tdx(s)
        dens = (
            np.imag(np.conj(D.ux) * D.uxx)
            + 0.5 * D.d(s) ** 2
            + 1.5 * s * D.ux2
            + 1.5 * J * ts
            + s * s * (J + 0.75 * ts)
            + 0.25 * s**4
        )
    elif n == 2:
        ts = D.tdx(s)
        s2 = D.d(s, 2)
        dens = (
            D.uxx2
            + (2 * D.ux2 - 3 * s2) * J
            + (2 * D.ux2 - 0.75 * s2) * ts
            + J * D.tdx(J)
            + 2 * s * s * D.ux2
            + s * (1.5 * D.d(s) ** 2 + 0.5 * ts**2)
            + J * (2 * s * ts + D.tdx(s * s))
            + s**3 * (J + (2.0 / 3.0) * ts)
            + 0.25 * s * s * D.tdx(s * s)
            + 0.2 * s**5
        )
    else:
        raise ValueError(f"hierarchy index must be one of 0, 1/2, 1, 3/2, 2; got {n!r}")
    return D.integral(dens)


@dataclass(frozen=True)
class FunctionalReport:
    H1: float
    H2: float
    H2_inls: Optional[float]
    mass_renorm: float
    correctors1: tuple
    correctors2: tuple
    hierarchy: dict


def functional_report(f: FieldState, p: ModelParams, with_hierarchy: bool = True) -> FunctionalReport:
    D = _dens(f, p)
    hier = {n: hierarchy_E(f, p, n) for n in (0, 0.5, 1, 1.5, 2)} if with_hierarchy else {}
    return FunctionalReport(
        H1=functional_H1(f, p, D),
        H2=functional_H2(f, p, D),
        H2_inls=functional_H2_inls(f, p, D) if p.integrable else None,
        mass_renorm=renormalized_mass(f),
        correctors1=correctors_H1(f, p, D),
        correctors2=correctors_H2(f, p, D),
        hierarchy=hier,
    )


def coercivity_lower_bound(f: FieldState, p: ModelParams) -> float:
    """``(1/6)||d_x f||^2 + (alpha^2 rho^2 / 6) || |f|^2 - rho^2 ||^2`` (valid for ``beta >= 0``)."""
    D = _dens(f, p)
    return D.integral(D.ux2) / 6.0 + p.alpha**2 * f.rho**2 / 6.0 * D.integral(D.g**2)


# -- local identities --------------------------------------------------------

IDENTITY_NAMES = ("mass", "dx", "dxx", "momentum")


def _identity_lhs(D: Densities):
    return (D.s, D.ux2, D.uxx2, D.J)


def _identity_rhs(D: Densities, p: ModelParams):
    a, b = p.alpha, p.beta
    s = D.s
    s1, s2, s3 = D.d(s, 1), D.d(s, 2), D.d(s, 3)
    ts2, ts3 = D.tdxk(s, 2), D.tdxk(s, 3)
    im12 = np.imag(np.conj(D.ux) * D.uxx)
    im23 = np.imag(np.conj(D.uxx) * D.uxxx)
    r_mass = D.d(2 * D.J + a * s * s)
    r_dx = D.d(2 * im12 + 0.5 * a * s1**2) + 2 * a * D.ux2 * s1 + 2 * b * D.J * ts2
    r_dxx = (
        D.d(2 * im23 + 0.5 * a * s2**2)
        + 2 * a * D.uxx2 * s1
        + 2 * a * D.d(D.ux2) * s2
        - 2 * a * D.ux2 * s3
        + 4 * b * im12 * ts2
        + 2 * b * D.d(D.J) * ts3
    )
    r_mom = 2 * D.d(D.ux2) - 0.5 * s3 + 2 * a * D.J * s1 + b * s * ts2
    return (r_mass, r_dx, r_dxx, r_mom)


def tderiv_identity_rates(f: FieldState, p: ModelParams) -> tuple[float, ...]:
    """Instantaneous check: L2 defect of each identity with ``u_t`` taken from the equation."""
    from .dynamics import rhs_mollified

    ut = rhs_mollified(f, p).values
    D = Densities(f, p)
    # exact first variations of the four densities along u_t
    ut_x = np.fft.ifft(D._ik * np.fft.fft(ut))
    ut_xx = np.fft.ifft((1j * f.grid.wavenumbers) ** 2 * np.fft.fft(ut))
    lhs = (
        2 * np.real(np.conj(D.u) * ut),
        2 * np.real(np.conj(D.ux) * ut_x),
        2 * np.real(np.conj(D.uxx) * ut_xx),
        np.imag(np.conj(ut) * D.ux + np.conj(D.u) * ut_x),
    )
    rhs = _identity_rhs(D, p)
    return tuple(f.grid.l2(l - r) for l, r in zip(lhs, rhs))


def tderiv_identity_residuals(traj: Trajectory) -> tuple[float, ...]:
    """Centered-difference defect of the four time-derivative identities.

    For every interior record the centered difference of each density is
    compared with the identity's right-hand side at the middle record; the
    L2 defect is maximized over records.
    """
    st = traj.states
    if len(st) < 3:
        raise ValueError("need at least 3 records")
    t = traj.times
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
        raise ValueError("records are not uniformly spaced")
    p = traj.params
    dens = [_identity_lhs(Densities(s, p)) for s in st]
    out = np.zeros(4)
    for i in range(1, len(st) - 1):
        D = Densities(st[i], p)
        rhs = _identity_rhs(D, p)
        for q in range(4):
            lhs = (dens[i + 1][q] - dens[i - 1][q]) / (t[i + 1] - t[i - 1])
            out[q] = max(out[q], D.grid.l2(lhs - rhs[q]))
    return tuple(float(v) for v in out)


def imim_identity_sides(f: FieldState) -> tuple[float, float]:
    """Both sides of the ``Im * Im`` integration-by-parts identity.

    Left: ``int Im[conj(u_x) u_xx] d_x Im[conj(u) u_x]``. Right:
    ``(1/2) int |u_xx|^2 d_x|u|^2 - (1/4) int d_x|u_x|^2 d_x^2|u|^2``.
    """
    D = Densities(f)
    # d_x Im[conj(u) u_x] = Im[conj(u) u_xx], formed pointwise
    lhs = D.integral(np.imag(np.conj(D.ux) * D.uxx) * np.imag(np.conj(D.u) * D.uxx))
    rhs = 0.5 * D.integral(D.uxx2 * D.d(D.s)) - 0.25 * D.integral(D.d(D.ux2) * D.d(D.s, 2))
    return lhs, rhs


def imim_identity_residual(f: FieldState) -> float:
    lhs, rhs = imim_identity_sides(f)
    return abs(lhs - rhs)


# -- a-priori bounds -----------------------------------------------------------


def linf_from_h1(h1: float, p: ModelParams, seam: float = 0.0) -> float:
    """Upper bound for ``||u||_inf`` implied by a value of ``H_1`` (``alpha != 0``, ``beta >= 0``).

    Coercivity gives ``||u_x||^2 <= 6 H_1`` and ``||g||^2 <= 6 H_1 / (alpha rho)^2``
    with ``g = |u|^2 - rho^2``. Since ``g`` nearly vanishes at the seam,
    ``g(x)^2 <= g_s^2 + ||g|| ||g'||`` and ``||g'|| <= 2 M ||u_x||``, so
    ``M = ||u||_inf`` solves ``M^2 <= rho^2 + sqrt(g_s^2 + 2 M ||g|| ||u_x||)``.
    ``seam`` is the measured seam gap ``max ||u| - rho|`` there.
    """
    from scipy.optimize import brentq

    if p.alpha == 0 or p.beta < 0:
        raise ValueError("the a-priori chain needs alpha != 0 and beta >= 0")
    rho = p.rho
    h1 = max(h1, 0.0)
    ux = np.sqrt(6.0 * h1)
    gn = np.sqrt(6.0 * h1) / (abs(p.alpha) * rho)
    gs = seam * (2.0 * rho + seam)

    def F(m):
        return m * m - rho * rho - np.sqrt(gs * gs + 2.0 * m * gn * ux)

    hi = rho + 1.0
    while F(hi) < 0:
        hi *= 2.0
    return float(brentq(F, 0.0, hi, xtol=1e-14)) if F(0.0) < 0 else 0.0


def apriori_E1_bound(h1: float, p: ModelParams, seam: float = 0.0) -> float:
    """``C_1`` with ``E^1(u(t)) <= C_1`` along a flow that conserves ``H_1 = h1``."""
    m = linf_from_h1(h1, p, seam)
    return 6.0 * max(h1, 0.0) + m * m + np.sqrt(6.0 * max(h1, 0.0)) / (abs(p.alpha) * p.rho)


def h2_growth_constant(p: ModelParams) -> float:
    """Fixed a-priori constant ``K`` in ``|H_2(t) - H_2(0)| <= K int (E1 + E1^1.5)(1 + ||u_xx||^2)``."""
    return (1.0 + abs(p.alpha) + abs(p.beta)) ** 2 * (1.0 + 1.0 / p.delta)


def h2_envelope(times, e1, uxx2, h2_0: float, K: float) -> np.ndarray:
    """Half-width of the ``H_2`` Gronwall envelope, by cumulative trapezoid on the records."""
    from scipy.integrate import cumulative_trapezoid

    e1 = np.asarray(e1, dtype=float)
    rate = (e1 + e1**1.5) * (1.0 + np.asarray(uxx2, dtype=float))
    return K * cumulative_trapezoid(rate, np.asarray(times, dtype=float), initial=0.0)
