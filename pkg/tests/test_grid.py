"""Grid primitives: nodes, quadrature, differentiation, coefficient space.

Everything here has a pencil-and-paper oracle: polynomials differentiate and
integrate exactly on a Gauss-Lobatto grid of sufficient order, and smooth
non-polynomials (e^y) converge spectrally, so fixed tolerances around 1e-12
at order 32 leave orders of magnitude of headroom.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poislab import (
    Grid,
    ModeProfile,
    antiderivative,
    build_grid,
    cheb_coefficients,
    cheb_nodes,
    coefficient_derivative,
    differentiate,
    eval_coefficients,
    integrate,
    interpolate,
    parity_parts,
    resolution_for_beta,
)


def test_nodes_are_cosines_descending():
    """Gauss-Lobatto nodes are cos(pi k / n), k = 0..n, so index 0 is y=+1."""
    g = build_grid(16)
    expect = np.cos(np.pi * np.arange(17) / 16.0)
    assert np.allclose(g.nodes, expect, atol=1e-15)
    assert g.nodes[0] == 1.0 and g.nodes[-1] == -1.0


def test_weights_integrate_even_powers():
    """Clenshaw-Curtis is exact on polynomials up to the grid order.

    int_{-1}^{1} y^{2m} dy = 2/(2m+1); odd powers integrate to zero.
    """
    g = build_grid(20)
    for m in range(0, 10):
        assert np.dot(g.weights, g.nodes ** (2 * m)) == pytest.approx(
            2.0 / (2 * m + 1), abs=1e-14)
        assert np.dot(g.weights, g.nodes ** (2 * m + 1)) == pytest.approx(
            0.0, abs=1e-14)


def test_quadrature_env_four_thirds():
    # int (1 - y^2) dy = 4/3, degree 2, exact on any grid here
    g = build_grid(64)
    assert np.dot(g.weights, 1.0 - g.nodes ** 2) == pytest.approx(
        4.0 / 3.0, abs=1e-14)


def test_quadrature_exponential_spectral():
    """At order 32 the quadrature error for e^y is far below 1e-12."""
    g = build_grid(32)
    val = float(np.dot(g.weights, np.exp(g.nodes)))
    assert abs(val - (np.e - 1.0 / np.e)) < 1e-12


def test_differentiate_polynomial_exact_all_orders():
    """d^k/dy^k of y^5 - 3y^2 + 2 from the four stored matrices."""
    g = build_grid(24)
    y = g.nodes
    p = ModeProfile(g, y ** 5 - 3.0 * y ** 2 + 2.0, 0.0)
    exact = [
        5 * y ** 4 - 6 * y,
        20 * y ** 3 - 6.0,
        60 * y ** 2,
        120 * y,
    ]
    for order, truth in enumerate(exact, start=1):
        got = differentiate(p, order).samples
        assert np.max(np.abs(got - truth)) < 1e-9 * max(1, np.max(np.abs(truth)))


def test_differentiate_rejects_bad_order():
    g = build_grid(8)
    p = ModeProfile(g, g.nodes, 0.0)
    with pytest.raises(ValueError):
        differentiate(p, 0)
    with pytest.raises(ValueError):
        differentiate(p, 5)


def test_antiderivative_matches_closed_form():
    """Antiderivative of 3y^2 vanishing at y=-1 is y^3 + 1."""
    g = build_grid(16)
    p = ModeProfile(g, 3.0 * g.nodes ** 2, 0.0)
    q = antiderivative(p)
    assert np.max(np.abs(q.samples - (g.nodes ** 3 + 1.0))) < 1e-12
    assert abs(q.samples[-1]) < 1e-13


def test_antiderivative_inverts_differentiate():
    g = build_grid(32)
    y = g.nodes
    p = ModeProfile(g, np.sin(2.0 * y), 0.0)
    back = differentiate(antiderivative(p)).samples
    assert np.max(np.abs(back - p.samples)) < 1e-10


def test_integrate_complex_profile():
    """integrate() is the plain weighted dot, so linear in complex samples."""
    g = build_grid(16)
    p = ModeProfile(g, (1.0 + 2.0j) * g.nodes ** 2, 0.0)
    assert integrate(p) == pytest.approx((1.0 + 2.0j) * 2.0 / 3.0, abs=1e-13)


def test_interpolate_reproduces_nodes_and_polynomials():
    """Barycentric interpolation is exact at the nodes and on polynomials."""
    g = build_grid(12)
    y = g.nodes
    p = ModeProfile(g, y ** 7 - y, 0.0)
    # exactly the stored samples at the nodes themselves
    assert np.max(np.abs(interpolate(p, y) - p.samples)) < 1e-13
    t = np.linspace(-0.95, 0.95, 41)
    assert np.max(np.abs(interpolate(p, t) - (t ** 7 - t))) < 1e-12


def test_interpolate_spectral_on_exponential():
    g = build_grid(32)
    p = ModeProfile(g, np.exp(g.nodes), 0.0)
    t = np.linspace(-1.0, 1.0, 101)
    assert np.max(np.abs(interpolate(p, t) - np.exp(t))) < 1e-12


def test_parity_split_reconstructs_and_projects():
    """Even/odd parts: e(y) = (p(y)+p(-y))/2 is symmetric under the node
    reversal y -> -y (the node set is symmetric), o(y) the antisymmetric rest.
    """
    g = build_grid(20)
    y = g.nodes
    p = ModeProfile(g, y ** 3 + 2.0 * y ** 2 - 1.0 + 0.5j * y, 0.0)
    even, odd = parity_parts(p)
    assert np.max(np.abs(even.samples + odd.samples - p.samples)) < 1e-14
    assert np.max(np.abs(even.samples - even.samples[::-1])) < 1e-14
    assert np.max(np.abs(odd.samples + odd.samples[::-1])) < 1e-14
    # pure parities are fixed points / annihilated
    e2, o2 = parity_parts(ModeProfile(g, y ** 2, 0.0))
    assert np.max(np.abs(e2.samples - y ** 2)) < 1e-14
    assert np.max(np.abs(o2.samples)) < 1e-14


def test_cheb_coefficients_pick_out_single_mode():
    """Samples of T_3 produce the unit coefficient vector e_3."""
    n = 16
    y = cheb_nodes(n)
    t3 = 4.0 * y ** 3 - 3.0 * y
    coeffs = cheb_coefficients(t3)
    expect = np.zeros(n + 1)
    expect[3] = 1.0
    assert np.max(np.abs(coeffs - expect)) < 1e-13


def test_coefficient_round_trip_and_derivative():
    """analysis -> synthesis is the identity; the derivative recurrence
    agrees with the dense differentiation matrix on smooth data."""
    g = build_grid(32)
    s = np.exp(g.nodes) * np.cos(g.nodes)
    coeffs = cheb_coefficients(s)
    assert np.max(np.abs(eval_coefficients(coeffs, 32) - s)) < 1e-13
    d_series = eval_coefficients(coefficient_derivative(coeffs), 32)
    d_matrix = g.diff[0] @ s
    assert np.max(np.abs(d_series - d_matrix)) < 1e-10


def test_cheb_nodes_extended_dtype():
    y = cheb_nodes(8, extended=True)
    assert y.dtype == np.longdouble
    assert float(y[0]) == 1.0 and float(y[-1]) == -1.0


def test_eval_coefficients_refuses_truncation():
    coeffs = np.zeros(9)
    with pytest.raises(ValueError):
        eval_coefficients(coeffs, 4)


def test_resolution_rule_floor_even_monotone():
    """N = max(64, ceil(22 sqrt(beta)), ceil(22 sqrt(|nhat|))), rounded even."""
    assert resolution_for_beta(0.0) == 64
    assert resolution_for_beta(1.0) == 64
    n100 = resolution_for_beta(100.0)
    assert n100 == 220
    assert resolution_for_beta(46.4) in (150, 152)
    for beta in (0.0, 10.0, 46.4, 100.0, 400.0):
        n = resolution_for_beta(beta)
        assert n % 2 == 0 and n >= 64
    # frequency term dominates when the layer is mild
    assert resolution_for_beta(1.0, nhat=2530.0) >= int(22 * np.sqrt(2530))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=7))
def test_differentiate_matches_polynomial_oracle(coeffs):
    """Random polynomial: matrix derivative equals the analytic one."""
    g = build_grid(24)
    c = np.array(coeffs)
    p = ModeProfile(g, np.polyval(c, g.nodes), 0.0)
    truth = np.polyval(np.polyder(c), g.nodes)
    got = differentiate(p).samples
    scale = max(1.0, float(np.max(np.abs(truth))))
    assert np.max(np.abs(got - truth)) < 1e-10 * scale


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 30))
def test_quadrature_weights_positive_and_total(n_half):
    """Weights stay positive and sum to the interval length for any order."""
    g = build_grid(2 * n_half)
    assert np.all(g.weights > 0.0)
    assert float(np.sum(g.weights)) == pytest.approx(2.0, abs=1e-13)
