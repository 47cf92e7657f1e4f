import math

import numpy as np
import pytest
from scipy.integrate import quad, trapezoid
from scipy.optimize import minimize_scalar

from ginls import oracles
from ginls.conserved import (
    Densities,
    apriori_E1_bound,
    coercivity_lower_bound,
    correctors_H1,
    correctors_H2,
    functional_H1,
    functional_H2,
    functional_H2_inls,
    functional_report,
    h2_envelope,
    h2_growth_constant,
    hierarchy_E,
    imim_identity_residual,
    imim_identity_sides,
    linf_from_h1,
    renormalized_mass,
    tderiv_identity_rates,
    tderiv_identity_residuals,
)
from ginls.dynamics import ModelParams, evolve, make_initial_data
from ginls.spectral import FieldState, make_grid
from ginls.zhidkov import energy_Ek, linf, seam_gap

from conftest import random_field

INLS = ModelParams(1.0, 1.0, 1.0, 1.0)

# -- closed forms ------------------------------------------------------------------


@pytest.mark.parametrize("p", [INLS, ModelParams(0.7, -1.3, 0.4, 1.0), ModelParams(0.0, 0.0, 2.0, 1.0)])
def test_constant_state_all_zero(p):
    g = make_grid(64, 10.0)
    f = make_initial_data("constant", g, 1.0)
    rep = functional_report(f, p)
    assert abs(rep.H1) < 1e-13 and abs(rep.H2) < 1e-13 and abs(rep.mass_renorm) < 1e-13
    assert max(map(abs, rep.correctors1 + rep.correctors2)) < 1e-13
    if p.integrable:
        assert abs(rep.H2_inls) < 1e-13
    else:
        assert rep.H2_inls is None


@pytest.mark.parametrize("rho,k,alpha", [(1.0, 2.0, 1.0), (1.7, 1.0, -0.5), (0.6, 3.0, 2.0)])
def test_plane_wave_closed_forms(rho, k, alpha):
    L = 2 * np.pi
    g = make_grid(64, L)
    f = make_initial_data("plane_wave", g, rho, k=k)
    p = ModelParams(alpha, abs(alpha), 1.3, rho)
    assert functional_H1(f, p) == pytest.approx(rho**2 * k**2 * L, rel=1e-12)
    # J = rho^2 k is constant: only the |u_x|^2 J corrector survives in H2
    h2 = rho**2 * k**4 * L + 2 * alpha * rho**4 * k**3 * L
    assert functional_H2(f, p) == pytest.approx(h2, rel=1e-12)
    h2i = h2 + 2 * alpha**2 * rho**6 * k**2 * L
    assert functional_H2_inls(f, p) == pytest.approx(h2i, rel=1e-12)
    assert abs(renormalized_mass(f)) < 1e-12


def test_h2_inls_rejects_nonintegrable():
    f = make_initial_data("constant", make_grid(16, 1.0), 1.0)
    for p in (ModelParams(1.0, 0.5), ModelParams(0.0, 0.0)):
        with pytest.raises(ValueError):
            functional_H2_inls(f, p)
    assert ModelParams(-2.0, 2.0).integrable and ModelParams(2.0, -2.0).integrable


def test_h2_beta_zero_drops_nonlocal_terms():
    g = make_grid(128, 20.0)
    f = random_field(g, 5)
    p = ModelParams(0.8, 0.0, 1.0, 1.0)
    i = correctors_H2(f, p)
    D = Densities(f, p)
    assert functional_H2(f, p) == pytest.approx(D.integral(D.uxx2) + 2 * 0.8 * i[0] - 3 * 0.8 * i[1], rel=1e-13)


def test_hierarchy_closed_forms():
    L, rho = 2 * np.pi, 1.3
    g = make_grid(64, L)
    c = make_initial_data("constant", g, rho)
    assert hierarchy_E(c, ModelParams(rho=rho), 0) == pytest.approx(rho**2 * L, rel=1e-13)
    assert hierarchy_E(c, ModelParams(rho=rho), 1) == pytest.approx(rho**6 * L / 3, rel=1e-13)
    k = 2.0
    w = make_initial_data("plane_wave", g, rho, k=k)
    assert hierarchy_E(w, ModelParams(rho=rho), 0.5) == pytest.approx(rho**2 * k * L + rho**4 * L / 2, rel=1e-13)
    with pytest.raises(ValueError):
        hierarchy_E(w, ModelParams(rho=rho), 3)


# -- independent quadrature oracles ------------------------------------------------------

A_SECH = 0.1


def _sech(x):
    return 1.0 / np.cosh(x)


def _f(x):
    return 1.0 + A_SECH * _sech(x)


def _fp(x):
    return -A_SECH * _sech(x) * np.tanh(x)


def _fpp(x):
    return A_SECH * _sech(x) * (np.tanh(x) ** 2 - _sech(x) ** 2)


def _g_hat(xi):
    # g = |f|^2 - 1 = 2A sech + A^2 sech^2; F[sech] = pi sech(pi xi/2), F[sech^2] = pi xi / sinh(pi xi/2)
    y = 0.5 * np.pi * xi
    s2 = np.pi * xi / np.sinh(y) if xi != 0 else 2.0
    return 2 * A_SECH * np.pi / np.cosh(y) + A_SECH**2 * s2


@pytest.fixture(scope="module")
def sech_state():
    grid = make_grid(1024, 80.0)
    return FieldState(grid, _f(grid.x), 1.0)


def _q(func, a, b):
    return quad(func, a, b, epsabs=0, epsrel=1e-13, limit=400)[0]


@pytest.mark.parametrize("delta", [0.5, 1.0, 3.0])
def test_h1_parseval_oracle(sech_state, delta):
    # line value: local terms by adaptive quadrature, nonlocal term by Plancherel
    # with the closed-form transform; J = 0 for a real profile
    L = sech_state.grid.length
    p = ModelParams(1.0, 1.0, delta, 1.0)
    g = lambda x: _f(x) ** 2 - 1.0  # noqa: E731
    local = _q(lambda x: _fp(x) ** 2 + (_f(x) ** 2 / 3 + 1 / 6) * g(x) ** 2, -L / 2, L / 2)
    nonlocal_ = _q(lambda k: (k / math.tanh(delta * k) if k > 0 else 1 / delta) * _g_hat(k) ** 2, 0, 40) / np.pi
    line = local + 0.5 * nonlocal_
    # the box drops the zero mode, where the line symbol tends to 1/delta
    zero_mode = 0.5 * _q(g, -L / 2, L / 2) ** 2 / (delta * L)
    assert functional_H1(sech_state, p) + zero_mode == pytest.approx(line, rel=1e-8)


def _box_convention_oracle(state, delta):
    """Pointwise line densities with ``T_delta d_x`` from the kernel p.v. oracle.

    The grid multiplier equals the line operator minus ``mean/delta`` (zero
    mode), so the oracle subtracts that constant and integrates over one box.
    """
    L, dx = state.grid.length, state.grid.dx
    h = dx / 4
    R = L / 2 + 8 * h

    def lat(func):
        return oracles.sample_line_function(func, R, h)

    lg = lat(lambda x: 2 * _f(x) * _fp(x))
    lq = lat(lambda x: 4 * _f(x) ** 3 * _fp(x))
    x = lg.nodes[np.abs(lg.nodes) <= L / 2 + 1e-9]
    s = _f(x) ** 2
    mg = trapezoid(s - 1, x) / L
    mq = trapezoid(s * s - 1, x) / L
    out = {
        "x": x,
        "s": s,
        "sp": 2 * _f(x) * _fp(x),
        "spp": 2 * _fp(x) ** 2 + 2 * _f(x) * _fpp(x),
        "ux2": _fp(x) ** 2,
        "uxx2": _fpp(x) ** 2,
        "Tg": oracles.kernel_Tdelta_pv(lg, delta, x).real - mg / delta,
        "Tq": oracles.kernel_Tdelta_pv(lq, delta, x).real - mq / delta,
    }
    return out


def test_functionals_box_convention_oracle(sech_state):
    delta = 1.0
    a = b = 1.0
    o = _box_convention_oracle(sech_state, delta)
    s, g, q, Tg, Tq = o["s"], o["s"] - 1, o["s"] ** 2 - 1, o["Tg"], o["Tq"]
    h1 = o["ux2"] + 0.5 * b * g * Tg + a * a * (s / 3 + 1 / 6) * g * g
    h2 = o["uxx2"] + b * (2 * o["ux2"] - 0.75 * o["spp"]) * Tg
    extra = (
        2 * a * a * s * s * o["ux2"]
        + a * a * s * (1.5 * o["sp"] ** 2 + 0.5 * Tg**2)
        + a * a * (s**3 - 1) * (2 / 3) * b * Tg
        + 0.25 * a * a * b * q * Tq
        + a**4 * (s**3 / 5 + 0.4 * s * s + 0.6 * s + 0.3) * g * g
    )
    x = o["x"]
    p = ModelParams(a, b, delta, 1.0)
    assert functional_H1(sech_state, p) == pytest.approx(trapezoid(h1, x), rel=1e-8)
    assert functional_H2(sech_state, p) == pytest.approx(trapezoid(h2, x), rel=1e-8)
    assert functional_H2_inls(sech_state, p) == pytest.approx(trapezoid(h2 + extra, x), rel=1e-8)


@pytest.mark.parametrize("rho,theta", [(1.0, 0.3), (1.5, 0.8), (1.2, 0.6)])
def test_grey_pair_mass_and_minimum(grey_grid, rho, theta):
    f = make_initial_data("grey_pair", grey_grid, rho, theta=theta)
    L, x0 = grey_grid.length, grey_grid.length / 4
    c, sn = math.cos(theta), math.sin(theta)

    def mod2(x):
        a = (c * np.tanh(rho * c * (x + x0))) ** 2 + sn**2
        b = (c * np.tanh(rho * c * (x - x0))) ** 2 + sn**2
        return rho**2 * (a * b - 1.0)

    oracle = _q(mod2, -L / 2, -x0) + _q(mod2, -x0, x0) + _q(mod2, x0, L / 2)
    assert renormalized_mass(f) == pytest.approx(oracle, rel=1e-10)
    assert renormalized_mass(f) == pytest.approx(-4 * rho * c, rel=1e-10)
    # each dip bottoms out at rho sin(theta)
    for centre in (-x0, x0):
        r = minimize_scalar(lambda x: mod2(x) + rho**2, bracket=(centre - 1, centre, centre + 1), tol=1e-12)
        assert math.sqrt(r.fun) == pytest.approx(rho * sn, rel=1e-8)


# -- coercivity and a-priori chains ----------------------------------------------------


@pytest.mark.parametrize("alpha,beta,delta", [(1.0, 1.0, 1.0), (0.5, 2.0, 0.3), (-1.5, 0.0, 1.0), (2.0, 0.7, 5.0)])
def test_h1_coercivity(field_corpus, alpha, beta, delta):
    for f in field_corpus:
        p = ModelParams(alpha, beta, delta, f.rho)
        assert functional_H1(f, p) >= coercivity_lower_bound(f, p) - 1e-10


@pytest.mark.parametrize("alpha,beta", [(1.0, 1.0), (0.5, 2.0), (-1.5, 0.0)])
def test_apriori_chain_static(field_corpus, alpha, beta):
    # the chain only uses coercivity and Gagliardo-Nirenberg, so it bounds every state
    for f in field_corpus:
        p = ModelParams(alpha, beta, 1.0, f.rho)
        h1 = functional_H1(f, p)
        gap = seam_gap(f)
        assert linf(f) <= linf_from_h1(h1, p, gap) * (1 + 1e-12)
        assert energy_Ek(f, 1) <= apriori_E1_bound(h1, p, gap)


def test_apriori_chain_rejects_focusing():
    with pytest.raises(ValueError):
        linf_from_h1(1.0, ModelParams(1.0, -1.0))
    with pytest.raises(ValueError):
        linf_from_h1(1.0, ModelParams(0.0, 1.0))
    assert linf_from_h1(0.0, INLS) == pytest.approx(1.0)


def test_h2_envelope_integrates_rate():
    t = np.linspace(0, 2, 5)
    env = h2_envelope(t, np.ones(5), np.zeros(5), 0.0, 3.0)
    assert env[0] == 0 and env[-1] == pytest.approx(3.0 * 2.0 * 2.0)
    assert h2_growth_constant(ModelParams(1.0, 1.0, 1.0)) == pytest.approx(18.0)


# -- local identities ---------------------------------------------------------------------


@pytest.mark.parametrize("p", [INLS, ModelParams(0.7, 1.3, 0.8, 1.0), ModelParams(1.0, 0.5, 2.0, 1.0, nonlocal_op="hilbert")])
def test_tderiv_identities_instantaneous(p):
    g = make_grid(256, 8 * np.pi)
    f = random_field(g, 9, band=2.0, amp=0.3)
    rates = tderiv_identity_rates(f, p)
    D = Densities(f, p)
    scale = max(g.l2(D.uxx2), 1.0)
    assert max(rates) <= 1e-9 * scale


def test_tderiv_residuals_constant_state():
    g = make_grid(64, 10.0)
    traj = evolve(make_initial_data("constant", g, 1.0), 0.2, 0.01, INLS, record_every=2)
    assert max(tderiv_identity_residuals(traj)) <= 1e-12


def test_tderiv_residuals_needs_three_records():
    g = make_grid(64, 10.0)
    traj = evolve(make_initial_data("constant", g, 1.0), 0.01, 0.01, INLS)
    with pytest.raises(ValueError):
        tderiv_identity_residuals(traj)


@pytest.mark.parametrize("p", [ModelParams(0.0, 0.0, 1.0, 1.0), INLS])
def test_tderiv_residuals_second_order(p):
    g = make_grid(128, 8 * np.pi)
    f0 = random_field(g, 2, band=1.5, amp=0.3)
    res = []
    for every in (8, 4, 2):
        traj = evolve(f0, 0.16, 0.0025, p, record_every=every)
        res.append(np.array(tderiv_identity_residuals(traj)))
    ratios = res[0] / res[1], res[1] / res[2]
    for r in ratios:
        assert np.all((r > 3.5) & (r < 4.5))


def test_imim_trivial_cases():
    g = make_grid(64, 2 * np.pi)
    assert imim_identity_residual(make_initial_data("constant", g, 1.0)) < 1e-14
    lhs, rhs = imim_identity_sides(make_initial_data("plane_wave", g, 1.2, k=3.0))
    assert abs(lhs) < 1e-10 and abs(rhs) < 1e-10


@pytest.mark.parametrize("seed", range(6))
def test_imim_band_limited(seed):
    g = make_grid(256, 8 * np.pi)
    f = random_field(g, seed, band=3.0, amp=0.5)
    lhs, rhs = imim_identity_sides(f)
    assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), abs(rhs))


def test_correctors_h1_definitions():
    g = make_grid(128, 20.0)
    f = random_field(g, 3)
    D = Densities(f, INLS)
    i1, i2, i3, i4 = correctors_H1(f, INLS)
    assert i3 == pytest.approx(D.integral(D.g**3), rel=1e-14)
    assert i4 == pytest.approx(g.l2(D.g) ** 2, rel=1e-12)
    assert i2 >= -1e-12  # T_delta d_x is a nonnegative operator
