"""Airy evaluator: closed-form anchors, library oracle, ODE consistency."""

import math

import numpy as np
import pytest
import scipy.special

from poislab import AI_ZERO, AIP_ZERO, AiryRangeError, airy_ai


def test_origin_constants_match_gamma_closed_forms():
    """Ai(0) = 3^(-2/3)/Gamma(2/3) and Ai'(0) = -3^(-1/3)/Gamma(1/3)."""
    assert abs(AI_ZERO - 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)) < 1e-15
    assert abs(AIP_ZERO + 3.0 ** (-1.0 / 3.0) / math.gamma(1.0 / 3.0)) < 1e-15
    v = airy_ai(0.0)
    assert abs(v.ai - AI_ZERO) < 1e-12
    assert abs(v.ai_prime - AIP_ZERO) < 1e-12


def test_against_scipy_on_the_real_line():
    for x in np.linspace(-10.0, 10.0, 81):
        ref_ai, ref_aip, _, _ = scipy.special.airy(x)
        v = airy_ai(complex(x))
        assert abs(v.ai - ref_ai) <= 1e-12 * max(abs(ref_ai), 1e-3)
        assert abs(v.ai_prime - ref_aip) <= 1e-12 * max(abs(ref_aip), 1e-3)


def test_against_scipy_complex_grid():
    """scipy's airy accepts complex arguments; spot-check a polar grid that
    crosses both evaluation regimes and the rotation sector."""
    rng = np.random.default_rng(5)
    for _ in range(120):
        r = rng.uniform(0.1, 10.0)
        th = rng.uniform(-np.pi, np.pi)
        z = r * np.exp(1j * th)
        ref_ai, ref_aip, _, _ = scipy.special.airy(z)
        v = airy_ai(z)
        scale = max(abs(ref_ai), abs(ref_aip), 1e-12)
        assert abs(v.ai - ref_ai) <= 1e-11 * scale
        assert abs(v.ai_prime - ref_aip) <= 1e-11 * scale


def test_regime_seam_is_continuous():
    """Values straddling the series/asymptotic switch radius must agree to
    the evaluation tolerance on every ray, not just the real axis."""
    for th in np.linspace(-np.pi, np.pi, 25):
        inner = airy_ai(7.1999 * np.exp(1j * th))
        outer = airy_ai(7.2001 * np.exp(1j * th))
        scale = max(abs(inner.ai), abs(outer.ai), 1e-15)
        assert abs(inner.ai - outer.ai) / scale < 1e-9


def test_ode_residual_via_taylor_step():
    """w'' = z w lets a fourth-order Taylor step predict Ai(z + h) from
    (Ai, Ai') at z alone: w''' = w + z w', w'''' = 2 w' + z^2 w.  The
    prediction must agree with the direct evaluation to 1e-10 relative.
    """
    rng = np.random.default_rng(17)
    h = 1e-2
    checked = 0
    for _ in range(200):
        z = complex(rng.uniform(-10, 10), rng.uniform(-3, 3))
        if abs(z) > 10.0:
            z *= 10.0 / abs(z)
        v = airy_ai(z)
        w, wp = v.ai, v.ai_prime
        w2 = z * w
        w3 = w + z * wp
        w4 = 2.0 * wp + z * z * w
        w5 = 3.0 * w2 + z * z * wp
        pred = w + h * wp + h ** 2 / 2 * w2 + h ** 3 / 6 * w3 \
            + h ** 4 / 24 * w4 + h ** 5 / 120 * w5
        direct = airy_ai(z + h).ai
        scale = max(abs(direct), abs(w), 1e-15)
        assert abs(pred - direct) / scale < 1e-10
        checked += 1
    assert checked == 200


def test_wronskian_with_rotated_branch():
    """Ai(z) and Ai(z w) with w = e^{2 pi i / 3} form a fundamental pair;
    their Wronskian is the constant e^{-pi i/6} / (2 pi)."""
    rot = np.exp(2j * np.pi / 3)
    target = np.exp(-1j * np.pi / 6) / (2.0 * np.pi)
    for z in [0.3, 2.0 - 1.0j, -4.0 + 2.0j, 6.5j]:
        a = airy_ai(z)
        b = airy_ai(z * rot)
        wr = a.ai * rot * b.ai_prime - a.ai_prime * b.ai
        assert abs(wr - target) < 1e-11


def test_range_guard():
    """Arguments whose dominant exponential overflows double are refused
    rather than returned as inf."""
    with pytest.raises(AiryRangeError):
        airy_ai(-800.0 + 0.0j)
    with pytest.raises(ValueError):
        airy_ai(complex(np.nan, 0.0))
