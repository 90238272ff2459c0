"""Airy function of the first kind on the complex plane.

Two regimes glued at |z| = 7.2:

* Maclaurin series for the small disk.  The two power-series families are
  summed in software floats at elevated precision because the series loses
  about 0.58*|z|^(3/2) decimal digits to cancellation (11 digits at the
  boundary), which double precision cannot absorb while holding the 1e-10
  contract.
* Beyond the disk, the standard large-argument expansions in
  zeta = (2/3) z^(3/2), truncated at the smallest term.  They are applied
  directly for |arg z| <= 2.2 and through the rotation identity
  Ai(z) = -e^{2 pi i/3} Ai(z e^{2 pi i/3}) - e^{-2 pi i/3} Ai(z e^{-2 pi i/3})
  otherwise; both rotated arguments then satisfy |arg| < 2.0, so the
  recursion terminates after one level.

The disk radius is set by the worst ray of the expansion: the optimally
truncated tail is O(e^{-2|zeta|}), which drops below 1e-11 only once
|z| >= 7.13.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

__all__ = ["AiryValue", "AiryRangeError", "airy_ai", "AI_ZERO", "AIP_ZERO"]

_SERIES_RADIUS = 7.2
_DIRECT_ARG = 2.2          # just past the subdominant switching ray at 2*pi/3
_EXP_LIMIT = 700.0         # exp argument beyond which doubles overflow
_ROT = complex(np.exp(2j * np.pi / 3))

# Values at the origin; the series is anchored on these two constants.
AI_ZERO = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
AIP_ZERO = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)


class AiryRangeError(OverflowError):
    """Growth exponent of the requested value exceeds double range."""


@dataclass(frozen=True)
class AiryValue:
    ai: complex
    ai_prime: complex


def _series(z: complex) -> AiryValue:
    """Maclaurin evaluation at working precision matched to the cancellation."""
    digits_lost = 0.6 * abs(z) ** 1.5
    with mpmath.workdps(24 + int(digits_lost)):
        zz = mpmath.mpc(z)
        z3 = zz * zz * zz
        c1 = mpmath.power(3, mpmath.mpf(-2) / 3) / mpmath.gamma(mpmath.mpf(2) / 3)
        c2 = mpmath.power(3, mpmath.mpf(-1) / 3) / mpmath.gamma(mpmath.mpf(1) / 3)
        # term recurrences for f, g and their derivatives
        tf, tg = mpmath.mpc(1), zz
        tdf, tdg = zz * zz / 2, mpmath.mpc(1)
        f, gg, df, dg = tf, tg, tdf, tdg
        eps = mpmath.mpf(10) ** (-(mpmath.mp.dps - 2))
        for k in range(1, 400):
            tf = tf * z3 / ((3 * k) * (3 * k - 1))
            tg = tg * z3 / ((3 * k + 1) * (3 * k))
            tdf = tdf * z3 / ((3 * k + 2) * (3 * k))
            tdg = tdg * z3 / ((3 * k) * (3 * k - 2))
            f += tf
            gg += tg
            df += tdf
            dg += tdg
            if (abs(tf) < eps * (1 + abs(f)) and abs(tg) < eps * (1 + abs(gg))
                    and abs(tdf) < eps * (1 + abs(df))
                    and abs(tdg) < eps * (1 + abs(dg))):
                break
        ai = c1 * f - c2 * gg
        aip = c1 * df - c2 * dg
        return AiryValue(complex(ai), complex(aip))


def _asym_coeffs(count: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.empty(count)
    v = np.empty(count)
    u[0] = v[0] = 1.0
    for k in range(1, count):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k)
        v[k] = u[k] * (6 * k + 1) / (1 - 6 * k)
    return u, v


_U, _V = _asym_coeffs(41)


def _asym_direct(z: complex) -> AiryValue:
    zs = np.sqrt(z)
    zeta = (2.0 / 3.0) * z * zs
    if -zeta.real > _EXP_LIMIT:
        raise AiryRangeError(
            f"Ai growth exponent {-zeta.real:.1f} exceeds double range at z={z}")
    quarter = np.sqrt(zs)
    s = s_prime = 1.0 + 0.0j
    term = term_p = 1.0 + 0.0j
    last = np.inf
    for k in range(1, len(_U)):
        term = term * (-1.0) / zeta
        mag = abs(term) * _U[k]
        if mag >= last:
            break
        s += _U[k] * term
        s_prime += _V[k] * term
        last = mag
    front = np.exp(-zeta) / (2.0 * np.sqrt(np.pi))
    return AiryValue(
        complex(front * s / quarter),
        complex(-front * quarter * s_prime),
    )


def _asym(z: complex) -> AiryValue:
    if abs(np.angle(z)) <= _DIRECT_ARG:
        return _asym_direct(z)
    w1 = z * _ROT
    w2 = z * np.conjugate(_ROT)
    a1 = _asym_direct(w1)
    a2 = _asym_direct(w2)
    ai = -_ROT * a1.ai - np.conjugate(_ROT) * a2.ai
    aip = -(_ROT ** 2) * a1.ai_prime - (np.conjugate(_ROT) ** 2) * a2.ai_prime
    return AiryValue(complex(ai), complex(aip))


def airy_ai(z: complex) -> AiryValue:
    """Ai(z) and Ai'(z) with relative accuracy ~1e-11 for |z| <= 40.

    Raises AiryRangeError where the result would overflow doubles (only
    possible in the growth sectors at |z| beyond ~105).
    """
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite argument {z}")
    if abs(z) <= _SERIES_RADIUS:
        return _series(z)
    return _asym(z)
