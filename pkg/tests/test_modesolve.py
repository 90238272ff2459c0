"""Single-mode solver: manufactured solutions, balances, zero mode.

The manufactured forcings are computed by hand (or by sympy for the random
cases) from the momentum equation in stream form,

    f = i nhat (U omega - U'' psi) - omega'' + nhat^2 omega,
    omega = psi'' - nhat^2 psi,

so the solver is checked against an oracle that never touches the package's
own differentiation.
"""

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from poislab import (
    ChannelParams,
    ModeProfile,
    SingularOperatorError,
    base_flow,
    build_grid,
    energy_identity_report,
    resolution_for,
    solve_clamped,
    solve_slip,
    solve_zero_mode,
    weighted_coercivity_gap,
    zero_mode_coefficients,
)


def clamped_forcing(params: ChannelParams, y: np.ndarray) -> np.ndarray:
    """Forcing whose clamped solution is psi* = (1-y^2)^2, derived by hand:
    psi'' = 12y^2 - 4, omega = 12y^2 - 4 - nhat^2 (1-y^2)^2, omega'' = 24
    - nhat^2 (12y^2 - 4)."""
    nh = params.nhat
    phi = params.phi
    psi = (1.0 - y * y) ** 2
    om = 12.0 * y * y - 4.0 - nh * nh * psi
    d2om = 24.0 - nh * nh * (12.0 * y * y - 4.0)
    u = 0.75 * phi * (1.0 - y * y)
    return 1j * nh * (u * om + 1.5 * phi * psi) - d2om + nh * nh * om


def slip_forcing(params: ChannelParams, y: np.ndarray) -> np.ndarray:
    """Forcing whose slip solution is psi* = sin(pi y); both sin(pi y) and
    its second derivative vanish at the walls."""
    nh = params.nhat
    phi = params.phi
    k2 = np.pi ** 2 + nh * nh
    s = np.sin(np.pi * y)
    return (1j * nh * (0.75 * phi * (1.0 - y * y) * (-k2) + 1.5 * phi)
            - k2 * k2) * s


def make_grid(params: ChannelParams):
    return build_grid(resolution_for(params))


def test_clamped_manufactured_recovery():
    """psi* = (1-y^2)^2 is recovered to 1e-8 in relative max norm."""
    for phi, n, L in [(1e4, 1, 1.0), (1e6, 5, 4.0)]:
        p = ChannelParams(phi, L, n)
        g = make_grid(p)
        f = ModeProfile(g, clamped_forcing(p, g.nodes), p.nhat)
        res = solve_clamped(p, f)
        err = np.max(np.abs(res.psi.samples - (1.0 - g.nodes ** 2) ** 2))
        assert err < 1e-8
        assert res.parity == "even"
        assert res.bc_defect < 1e-11


def test_slip_manufactured_recovery():
    """psi* = sin(pi y) is recovered to 1e-8 in relative max norm."""
    for phi, n, L in [(1e3, 1, 1.0), (1e5, 5, 1.0)]:
        p = ChannelParams(phi, L, n)
        g = make_grid(p)
        f = ModeProfile(g, slip_forcing(p, g.nodes), p.nhat)
        res = solve_slip(p, f)
        err = np.max(np.abs(res.psi.samples - np.sin(np.pi * g.nodes)))
        assert err < 1e-8
        assert res.parity == "odd"
        assert res.residual < 1e-9


def test_stokes_limit_clamped():
    """phi = 0 drops the advection term; the pure fourth-order balance
    f = -omega'' + nhat^2 omega must still be solved cleanly."""
    p = ChannelParams(0.0, 1.0, 2)
    g = build_grid(64)
    f = ModeProfile(g, clamped_forcing(p, g.nodes), p.nhat)
    res = solve_clamped(p, f)
    err = np.max(np.abs(res.psi.samples - (1.0 - g.nodes ** 2) ** 2))
    assert err < 1e-10


def test_sympy_random_polynomial_oracle():
    """Random clamped polynomial targets via a fully symbolic forcing.

    psi* = (1-y^2)^2 p(y) satisfies the clamped conditions for any
    polynomial p, and sympy differentiates exactly.
    """
    ysym = sympy.symbols("y", real=True)
    rng = np.random.default_rng(11)
    p = ChannelParams(1e4, 2.0, 3)
    g = make_grid(p)
    nh = sympy.Rational(3, 2)
    phi = sympy.Integer(10000)
    for _ in range(2):
        coeffs = rng.integers(-3, 4, size=4)
        poly = sum(int(c) * ysym ** k for k, c in enumerate(coeffs))
        psi = (1 - ysym ** 2) ** 2 * poly
        om = sympy.diff(psi, ysym, 2) - nh ** 2 * psi
        u = sympy.Rational(3, 4) * phi * (1 - ysym ** 2)
        f = (sympy.I * nh * (u * om + sympy.Rational(3, 2) * phi * psi)
             - sympy.diff(om, ysym, 2) + nh ** 2 * om)
        f_fn = sympy.lambdify(ysym, f, "numpy")
        psi_fn = sympy.lambdify(ysym, psi, "numpy")
        fs = np.asarray(f_fn(g.nodes), dtype=complex)
        res = solve_clamped(p, ModeProfile(g, fs, p.nhat))
        target = np.asarray(psi_fn(g.nodes), dtype=complex)
        scale = max(np.max(np.abs(target)), 1.0)
        assert np.max(np.abs(res.psi.samples - target)) / scale < 1e-9


def test_zero_forcing_gives_zero():
    p = ChannelParams(1e5, 1.0, 1)
    g = make_grid(p)
    res = solve_clamped(p, ModeProfile(g, np.zeros(g.n + 1), p.nhat))
    assert np.max(np.abs(res.psi.samples)) == 0.0


def test_linearity():
    """The solve map is linear: solve(f + 2i h) = solve(f) + 2i solve(h)."""
    p = ChannelParams(1e4, 1.0, 2)
    g = make_grid(p)
    y = g.nodes
    f = ModeProfile(g, np.cos(3 * y) + 0.0j, p.nhat)
    h = ModeProfile(g, y ** 3 + 0.0j, p.nhat)
    combo = ModeProfile(g, f.samples + 2j * h.samples, p.nhat)
    lhs = solve_slip(p, combo).psi.samples
    rhs = (solve_slip(p, f).psi.samples + 2j * solve_slip(p, h).psi.samples)
    scale = max(np.max(np.abs(lhs)), 1e-30)
    assert np.max(np.abs(lhs - rhs)) / scale < 1e-10


def test_conjugation_symmetry():
    """Flipping the sign of n and conjugating the forcing conjugates the
    solution; this is what makes real velocity fields closed under solves."""
    g = build_grid(80)
    y = g.nodes
    fs = (y ** 2 - 0.4) + 1j * y ** 3
    plus = ChannelParams(1e4, 1.0, 2)
    minus = ChannelParams(1e4, 1.0, -2)
    sol_p = solve_clamped(plus, ModeProfile(g, fs, plus.nhat)).psi.samples
    sol_m = solve_clamped(minus, ModeProfile(g, np.conj(fs), minus.nhat)).psi.samples
    scale = max(np.max(np.abs(sol_p)), 1e-30)
    assert np.max(np.abs(sol_m - np.conj(sol_p))) / scale < 1e-12


def test_repeat_solves_are_bitwise_identical():
    p = ChannelParams(1e5, 1.0, 3)
    g = make_grid(p)
    f = ModeProfile(g, np.exp(1j * g.nodes), p.nhat)
    a = solve_slip(p, f).psi.samples
    b = solve_slip(p, f).psi.samples
    assert a.tobytes() == b.tobytes()


def test_parity_tags():
    p = ChannelParams(1e3, 1.0, 1)
    g = make_grid(p)
    y = g.nodes
    even = solve_slip(p, ModeProfile(g, 1.0 - y * y + 0j, p.nhat))
    odd = solve_slip(p, ModeProfile(g, y ** 3 + 0j, p.nhat))
    mixed = solve_slip(p, ModeProfile(g, y + y * y + 0j, p.nhat))
    assert (even.parity, odd.parity, mixed.parity) == ("even", "odd", "mixed")


def test_error_modes():
    g = build_grid(16)
    f = ModeProfile(g, np.ones(17), 0.0)
    with pytest.raises(ValueError, match="zero_mode"):
        solve_clamped(ChannelParams(1.0, 1.0, 0), f)
    with pytest.raises(ValueError, match="nhat"):
        solve_clamped(ChannelParams(1.0, 1.0, 2), ModeProfile(g, np.ones(17), 1.0))
    bf = base_flow(1.0, build_grid(24))
    with pytest.raises(ValueError, match="grid"):
        solve_clamped(ChannelParams(1.0, 1.0, 2),
                      ModeProfile(g, np.ones(17), 2.0), bf)
    assert issubclass(SingularOperatorError, RuntimeError)


def test_energy_identities_on_slip_solve():
    """The four integral balances of the slip problem hold to 1e-7.

    They are exact consequences of the equation (integration by parts with
    vanishing boundary terms), so their defect measures quadrature plus
    solver error only.
    """
    p = ChannelParams(1e4, 1.0, 1)
    g = make_grid(p)
    y = g.nodes
    f = ModeProfile(g, np.sin(np.pi * y) * (1.0 + 0.5j), p.nhat)
    res = solve_slip(p, f)
    rep = energy_identity_report(p, f, res)
    assert set(rep) == {"energy_real", "energy_imag",
                        "curvature_real", "curvature_imag"}
    for key, val in rep.items():
        assert val < 1e-7, (key, val)


def test_weighted_coercivity_gap_one_sided():
    """For even forcing the weighted quadratic form is dominated by the
    forcing pairing; both sides are returned so the margin is visible."""
    p = ChannelParams(1e5, 1.0, 2)
    g = make_grid(p)
    y = g.nodes
    f = ModeProfile(g, (1.0 - y * y) * (1.0 + 0.2j), p.nhat)
    res = solve_slip(p, f)
    assert res.parity == "even"
    lhs, rhs = weighted_coercivity_gap(p, f, res)
    assert 0.0 <= lhs <= rhs
    with pytest.raises(ValueError):
        weighted_coercivity_gap(ChannelParams(1e5, 0.5, 1), f, res)


def test_zero_mode_constant_forcing_vanishes():
    """Constant mean forcing: psi'''' = 0 with four wall conditions kills
    every cubic, so the correction is identically zero."""
    g = build_grid(32)
    psi0 = solve_zero_mode(ModeProfile(g, np.full(33, 2.5), 0.0))
    assert np.max(np.abs(psi0.samples)) < 1e-14


def test_zero_mode_linear_forcing_closed_form():
    """f1 = y integrates to psi0 = (1-y^2)^2 / 24 with coefficients
    (A1, A2) = (0, 1/3): psi'''' = 1, clamped at both walls."""
    g = build_grid(32)
    f1 = ModeProfile(g, g.nodes.astype(complex), 0.0)
    a1, a2 = zero_mode_coefficients(f1)
    assert a1 == pytest.approx(0.0, abs=1e-14)
    assert a2 == pytest.approx(1.0 / 3.0, rel=1e-13)
    psi0 = solve_zero_mode(f1)
    target = (1.0 - g.nodes ** 2) ** 2 / 24.0
    assert np.max(np.abs(psi0.samples - target)) < 1e-14


@settings(max_examples=12, deadline=None)
@given(
    phi_exp=st.floats(min_value=1.0, max_value=5.0),
    n=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2 ** 16),
)
def test_random_forcing_solves_are_certified(phi_exp, n, seed):
    """Whatever the smooth forcing, the reported residual and boundary
    defect stay under the certification gates."""
    p = ChannelParams(10.0 ** phi_exp, 1.0, n)
    g = make_grid(p)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    fs = sum(ck * g.nodes ** k for k, ck in enumerate(c))
    res = solve_slip(p, ModeProfile(g, fs, p.nhat))
    assert res.residual < 1e-9
    assert res.bc_defect < 1e-11
