"""Base flow, mode forcing, and regime bookkeeping.

The background shear U(y) = (3/4) phi (1 - y^2) is pinned by two facts:
its channel integral equals the flux phi, and U'' is the constant
-(3/2) phi.  Everything else here is bookkeeping whose oracles are direct
substitution.
"""

import numpy as np
import pytest

from poislab import (
    ChannelParams,
    ForcingMode,
    ModeProfile,
    RegimeThresholds,
    base_flow,
    build_grid,
    differentiate,
    layer_width,
    mode_rhs,
    resolution_for,
    velocity_of,
    vorticity_of,
)


def test_base_flow_samples_and_flux():
    """U(0) = 3phi/4, U(+-1) = 0, int U dy = phi, U'' = -3phi/2."""
    g = build_grid(32)
    bf = base_flow(10.0, g)
    u = bf.u.samples.real
    assert u[0] == pytest.approx(0.0, abs=1e-13)
    assert u[-1] == pytest.approx(0.0, abs=1e-13)
    mid = np.argmin(np.abs(g.nodes))
    assert u[mid] == pytest.approx(7.5, abs=1e-12)
    assert np.dot(g.weights, u) == pytest.approx(10.0, abs=1e-12)
    assert np.max(np.abs(bf.d2u.samples + 15.0)) < 1e-13
    # du is the derivative of u on the same grid
    assert np.max(np.abs(differentiate(bf.u).samples - bf.du.samples)) < 1e-9


def test_base_flow_stokes_limit_and_negative():
    g = build_grid(16)
    bf = base_flow(0.0, g)
    assert np.max(np.abs(bf.u.samples)) == 0.0
    with pytest.raises(ValueError):
        base_flow(-1.0, g)


def test_params_validation_and_nhat():
    p = ChannelParams(1e4, 2.0, 3)
    assert p.nhat == pytest.approx(1.5)
    ChannelParams(0.0, 1.0, 1)  # Stokes limit is a valid parameter point
    with pytest.raises(ValueError):
        ChannelParams(-1.0, 1.0, 1)
    with pytest.raises(ValueError):
        ChannelParams(1.0, 0.0, 1)


def test_layer_width_cube_root():
    """beta = |3 phi nhat / 2|^(1/3): cube of the width is the shear rate."""
    p = ChannelParams(1e6, 1.0, 1)
    assert layer_width(p) == pytest.approx((1.5e6) ** (1.0 / 3.0), rel=1e-13)
    assert layer_width(ChannelParams(0.0, 1.0, 1)) == 0.0


def test_resolution_for_uses_both_scales():
    """The grid order must see the layer at small n and the wall scale at
    large n; both floors are active in their own corner."""
    lo = resolution_for(ChannelParams(1e6, 1.0, 1))
    hi = resolution_for(ChannelParams(1e5, 1.0, 2530))
    assert lo >= int(22 * layer_width(ChannelParams(1e6, 1.0, 1)) ** 0.5)
    assert hi >= int(22 * 2530 ** 0.5)
    assert lo % 2 == 0 and hi % 2 == 0


def test_forcing_mode_norm_and_validation():
    g = build_grid(24)
    y = g.nodes
    f1 = ModeProfile(g, 1.0 - y * y, 2.0)
    f2 = ModeProfile(g, y * (1.0 - y * y), 2.0)
    fm = ForcingMode(f1, f2)
    # ||F||^2 = int (1-y^2)^2 + y^2 (1-y^2)^2 dy = 16/15 + 16/105 = 128/105
    assert fm.l2_norm() == pytest.approx(np.sqrt(128.0 / 105.0), rel=1e-12)
    with pytest.raises(ValueError):
        ForcingMode(f1, ModeProfile(g, y, 3.0))


def test_mode_rhs_polynomial_oracle():
    """f = i nhat F2 - F1' checked against hand derivatives.

    F1 = 1 - y^2, F2 = y(1 - y^2), nhat = 2:
    f = 2i y(1-y^2) + 2y, purely odd.
    """
    g = build_grid(24)
    y = g.nodes
    fm = ForcingMode(ModeProfile(g, 1.0 - y * y, 2.0),
                     ModeProfile(g, y * (1.0 - y * y), 2.0))
    f = mode_rhs(fm)
    truth = 2.0j * y * (1.0 - y * y) + 2.0 * y
    assert np.max(np.abs(f.samples - truth)) < 1e-11
    assert f.nhat == 2.0


def test_velocity_and_vorticity_identities():
    """v1 = -psi', v2 = i nhat psi; omega = psi'' - nhat^2 psi; and the
    curl of the velocity pair reproduces omega: i nhat v2 - v1' = omega."""
    g = build_grid(32)
    y = g.nodes
    nh = 1.5
    psi = ModeProfile(g, (1.0 - y * y) ** 2 * (1.0 + 0.3j * y), nh)
    v1, v2 = velocity_of(psi)
    om = vorticity_of(psi)
    assert np.max(np.abs(v2.samples - 1j * nh * psi.samples)) < 1e-14
    assert np.max(np.abs(v1.samples + differentiate(psi).samples)) < 1e-14
    curl = 1j * nh * v2.samples - differentiate(v1).samples
    assert np.max(np.abs(curl - om.samples)) < 1e-9
    # divergence-free by construction: i nhat v1 + v2' = 0
    div = 1j * nh * v1.samples + differentiate(v2).samples
    assert np.max(np.abs(div)) < 1e-9


def test_regime_gates():
    """Intermediate: 1 <= |n| <= eps1 L sqrt(phi); high needs eps1^2 phi >= 276."""
    th = RegimeThresholds(eps1=0.1)
    assert th.in_intermediate(ChannelParams(1e6, 1.0, 5))
    assert not th.in_intermediate(ChannelParams(1e6, 1.0, 2000))
    assert th.in_high(ChannelParams(1e6, 1.0, 2000))
    # eps1^2 phi = 27.6 < 276: the high-frequency analysis does not apply
    assert not th.in_high(ChannelParams(2760.0, 1.0, 2000))
    with pytest.raises(ValueError):
        RegimeThresholds(eps1=0.0)
    # the closure flux floor is astronomically out of desk range
    assert th.flux_floor(1.0) == pytest.approx(2.0 ** 63)
