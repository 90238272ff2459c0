"""Direct solvers for the linearized stream-function equation of one mode.

The fourth-order problem

    -i*nhat*U'' psi + i*nhat*U (psi'' - nhat^2 psi) - (d2/dy2 - nhat^2)^2 psi = f

is discretized as a coupled (psi, omega) system with omega = psi'' - nhat^2 psi,
which keeps the highest explicit derivative at second order.  Boundary rows
replace the wall collocation equations: clamped enforces psi = psi' = 0,
slip enforces psi = psi'' = 0.  The zero mode reduces to a quadrature formula.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from .channel import BaseFlow, ChannelParams, base_flow
from .grid import (
    Grid,
    ModeProfile,
    antiderivative,
    cheb_coefficients,
    cheb_nodes,
    coefficient_derivative,
    differentiate,
    eval_coefficients,
)

__all__ = [
    "SingularOperatorError",
    "LinearSolveResult",
    "ModeOperator",
    "solve_clamped",
    "solve_slip",
    "solve_zero_mode",
    "zero_mode_coefficients",
    "energy_identity_report",
    "weighted_coercivity_gap",
]

_TINY = 1e-300


class SingularOperatorError(RuntimeError):
    """Discrete operator could not be factored or produced non-finite output."""

    def __init__(self, message: str, cond_estimate: float):
        super().__init__(f"{message} (condition estimate {cond_estimate:.3e})")
        self.cond_estimate = cond_estimate


@dataclass
class LinearSolveResult:
    psi: ModeProfile
    omega: ModeProfile
    residual: float
    bc_defect: float
    parity: str
    wall_derivatives: Optional[tuple[complex, complex]]


class ModeOperator:
    """Factored discrete operator for one (phi, L, n), reusable across solves.

    The factorization is the expensive part of a solve; iteration schemes
    hold one of these per mode and call :meth:`solve_raw` with fresh data.
    """

    def __init__(self, params: ChannelParams, grid: Grid, bc: str,
                 base: Optional[BaseFlow] = None):
        if params.n == 0:
            raise ValueError("mode 0 has its own quadrature solver")
        if bc not in ("clamped", "slip"):
            raise ValueError(f"unknown boundary condition {bc!r}")
        self.params = params
        self.grid = grid
        self.bc = bc
        self.base = base if base is not None else base_flow(params.phi, grid)
        if self.base.u.grid is not grid:
            raise ValueError("base flow sampled on a different grid")
        self._lu = self._factor()
        y_ld = cheb_nodes(grid.n, extended=True)
        phi_ld = np.longdouble(params.phi)
        self._u_ld = 0.75 * phi_ld * (1.0 - y_ld * y_ld)
        self._d2u_ld = -1.5 * phi_ld

    def _assemble(self) -> np.ndarray:
        g = self.grid
        m = g.n + 1
        nh = self.params.nhat
        d1, d2 = g.diff[0], g.diff[1]
        u = self.base.u.samples.real
        d2u = self.base.d2u.samples.real
        a = np.zeros((2 * m, 2 * m), dtype=complex)
        # vorticity definition rows: psi'' - nhat^2 psi - omega = 0
        a[:m, :m] = d2
        a[:m, :m] -= nh * nh * np.eye(m)
        a[:m, m:] = -np.eye(m)
        # momentum rows: -i nh U'' psi + i nh U omega - omega'' + nh^2 omega = f
        a[m:, :m] = np.diag(-1j * nh * d2u)
        a[m:, m:] = -d2 + np.diag(1j * nh * u + nh * nh)
        # wall rows: psi = 0 on both blocks' boundary slots
        for j in (0, g.n):
            a[j, :] = 0.0
            a[j, j] = 1.0
            a[m + j, :] = 0.0
            dwall = d1 if self.bc == "clamped" else d2
            a[m + j, :m] = dwall[j]
        return a

    def _factor(self):
        a = self._assemble()
        # equilibrate: collocation rows scale like n^4 while wall rows are O(1),
        # and an unscaled LU dumps its backward error onto the small rows
        row = np.max(np.abs(a), axis=1)
        row[row == 0.0] = 1.0
        a = a / row[:, None]
        col = np.max(np.abs(a), axis=0)
        col[col == 0.0] = 1.0
        a = a / col[None, :]
        self._row_scale = 1.0 / row
        self._col_scale = 1.0 / col
        try:
            lu = lu_factor(a)
        except LinAlgError as exc:
            raise SingularOperatorError(
                f"factorization failed for n={self.params.n}",
                float(np.linalg.cond(a)),
            ) from exc
        if not np.all(np.isfinite(lu[0])):
            raise SingularOperatorError(
                f"factorization produced non-finite entries for n={self.params.n}",
                float(np.linalg.cond(a)),
            )
        return lu

    def _precond(self, res: np.ndarray) -> np.ndarray:
        scaled = lu_solve(self._lu, res * self._row_scale)
        return scaled * self._col_scale

    def _apply_ld(self, psi: np.ndarray, om: np.ndarray) -> np.ndarray:
        """Discrete operator applied in long double via coefficient space.

        Matches the assembled matrix exactly on polynomial data, so iterative
        refinement against this application converges to the solution of the
        exact collocation system rather than its rounded image.
        """
        n = self.grid.n
        nh = np.longdouble(self.params.nhat)
        a_psi = cheb_coefficients(psi)
        dpsi = eval_coefficients(coefficient_derivative(a_psi), n)
        ddpsi = eval_coefficients(
            coefficient_derivative(coefficient_derivative(a_psi)), n)
        a_om = cheb_coefficients(om)
        ddom = eval_coefficients(
            coefficient_derivative(coefficient_derivative(a_om)), n)
        r1 = ddpsi - nh * nh * psi - om
        r2 = (-1j * nh * self._d2u_ld * psi
              + (1j * nh * self._u_ld + nh * nh) * om - ddom)
        for j in (0, n):
            r1[j] = psi[j]
            r2[j] = dpsi[j] if self.bc == "clamped" else ddpsi[j]
        return np.concatenate([r1, r2])

    def solve_raw(self, f_samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve one right-hand side; returns (psi, omega) nodal arrays.

        The double-precision LU is polished by iterative refinement with the
        residual evaluated in long double, and the refined iterate is kept in
        long double: diagnostics downstream differentiate these samples, which
        amplifies any stored rounding by ~n^2 per derivative order.
        """
        m = self.grid.n + 1
        rhs = np.zeros(2 * m, dtype=np.clongdouble)
        rhs[m:] = f_samples
        for j in (0, self.grid.n):
            rhs[j] = 0.0
            rhs[m + j] = 0.0
        x = self._precond(rhs.astype(complex)).astype(np.clongdouble)
        scale = max(float(np.max(np.abs(rhs))), _TINY)
        best = np.inf
        for _ in range(8):
            res = rhs - self._apply_ld(x[:m], x[m:])
            err = float(np.max(np.abs(res)))
            if not np.isfinite(err):
                break
            if err >= 0.9 * best or err <= 1e-22 * scale:
                break
            best = err
            x = x + self._precond(res.astype(complex)).astype(np.clongdouble)
        if not np.all(np.isfinite(x)):
            raise SingularOperatorError(
                f"solve produced non-finite values for n={self.params.n}",
                float(np.linalg.cond(self._assemble())),
            )
        return x[:m], x[m:]


def _parity_tag(psi: np.ndarray) -> str:
    scale = np.max(np.abs(psi))
    if scale == 0.0:
        return "even"
    odd_defect = np.max(np.abs(psi - psi[::-1]))
    even_defect = np.max(np.abs(psi + psi[::-1]))
    if odd_defect <= 1e-10 * scale:
        return "even"
    if even_defect <= 1e-10 * scale:
        return "odd"
    return "mixed"


def _system_residual(op: ModeOperator, f: ModeProfile,
                     psi_s: np.ndarray, om_s: np.ndarray) -> float:
    """Max-norm residual of both first-order-system equations.

    Evaluated at the interior nodes of a doubled verification grid through
    the polynomial interpolants, so enforced collocation zeros do not mask
    truncation error.  Differentiation happens on the Chebyshev coefficients
    in long double: nodal differentiation amplifies rounding by ~n^2 per
    order whatever the algorithm, and double precision would swamp the 1e-9
    gate at the largest fluxes.
    """
    fine_order = 2 * op.grid.n
    yv = cheb_nodes(fine_order, extended=True)
    nh = op.params.nhat
    phi = np.longdouble(op.params.phi)

    def series(samples: np.ndarray) -> np.ndarray:
        return cheb_coefficients(samples.astype(np.clongdouble))

    def deriv2(coeffs: np.ndarray) -> np.ndarray:
        return coefficient_derivative(coefficient_derivative(coeffs))

    a_psi = series(psi_s)
    a_om = series(om_s)
    psi_v = eval_coefficients(a_psi, fine_order)
    om_v = eval_coefficients(a_om, fine_order)
    f_v = eval_coefficients(series(f.samples), fine_order)
    dd_psi = eval_coefficients(deriv2(a_psi), fine_order)
    dd_om = eval_coefficients(deriv2(a_om), fine_order)
    u_v = 0.75 * phi * (1.0 - yv * yv)
    d2u_v = -1.5 * phi

    interior = slice(1, -1)
    r_def = (dd_psi - nh * nh * psi_v - om_v)[interior]
    r_mom = (-1j * nh * d2u_v * psi_v + 1j * nh * u_v * om_v
             - (dd_om - nh * nh * om_v) - f_v)[interior]
    om_scale = max(float(np.max(np.abs(om_v))), _TINY)
    f_scale = max(float(np.max(np.abs(f_v))), _TINY)
    return max(
        float(np.max(np.abs(r_def))) / om_scale,
        float(np.max(np.abs(r_mom))) / f_scale,
    )


def _finish(op: ModeOperator, f: ModeProfile,
            psi_s: np.ndarray, om_s: np.ndarray) -> LinearSolveResult:
    g = op.grid
    psi = ModeProfile(g, psi_s.astype(complex), op.params.nhat)
    omega = ModeProfile(g, om_s.astype(complex), op.params.nhat)
    # wall values of psi' and psi'' from the long-double coefficient series;
    # the nodal derivative matrix in double would add ~eps*n^2 of its own noise
    a_psi = cheb_coefficients(psi_s.astype(np.clongdouble))
    dpsi = eval_coefficients(coefficient_derivative(a_psi), g.n)
    ddpsi = eval_coefficients(
        coefficient_derivative(coefficient_derivative(a_psi)), g.n)
    # each condition is normalized by the sup of the derivative it constrains:
    # at layer parameters |psi''| dwarfs |psi|, and dividing a wall value of
    # psi'' by the small sup of psi would misread round-off as a violation
    walls = (0, g.n)
    scale0 = max(float(np.max(np.abs(psi_s))), _TINY)
    bc_vals = [float(abs(psi_s[j])) / scale0 for j in walls]
    if op.bc == "clamped":
        scale1 = max(float(np.max(np.abs(dpsi))), _TINY)
        bc_vals += [float(abs(dpsi[j])) / scale1 for j in walls]
    else:
        scale2 = max(float(np.max(np.abs(ddpsi))), _TINY)
        bc_vals += [float(abs(ddpsi[j])) / scale2 for j in walls]
    return LinearSolveResult(
        psi=psi,
        omega=omega,
        residual=_system_residual(op, f, psi_s, om_s),
        bc_defect=max(bc_vals),
        parity=_parity_tag(psi_s.astype(complex)),
        wall_derivatives=(complex(dpsi[0]), complex(dpsi[-1])),
    )


def _solve(params: ChannelParams, f: ModeProfile, bc: str,
           base: Optional[BaseFlow]) -> LinearSolveResult:
    if params.n == 0:
        raise ValueError("mode 0 must go through solve_zero_mode")
    if f.nhat != params.nhat:
        raise ValueError(f"forcing nhat {f.nhat} does not match params {params.nhat}")
    op = ModeOperator(params, f.grid, bc, base)
    psi_s, om_s = op.solve_raw(f.samples)
    return _finish(op, f, psi_s, om_s)


def solve_clamped(params: ChannelParams, f: ModeProfile,
                  base: Optional[BaseFlow] = None) -> LinearSolveResult:
    """No-slip solve: psi(+-1) = psi'(+-1) = 0."""
    return _solve(params, f, "clamped", base)


def solve_slip(params: ChannelParams, f: ModeProfile,
               base: Optional[BaseFlow] = None) -> LinearSolveResult:
    """Stress-free solve: psi(+-1) = psi''(+-1) = 0."""
    return _solve(params, f, "slip", base)


def _zero_mode_pieces(f1_mean: ModeProfile):
    t1 = antiderivative(f1_mean)              # single integral from y = -1
    t2 = antiderivative(t1)                   # double integral
    t3 = antiderivative(t2)                   # triple integral T(y)
    t_top = t3.samples[0]
    d_top = t2.samples[0]
    a1 = 1.5 * t_top - 1.5 * d_top
    a2 = d_top - 1.5 * t_top
    return t3, a1, a2


def zero_mode_coefficients(f1_mean: ModeProfile) -> tuple[complex, complex]:
    """Cubic and quadratic correction coefficients (A1, A2) of the zero mode."""
    _, a1, a2 = _zero_mode_pieces(f1_mean)
    return complex(a1), complex(a2)


def solve_zero_mode(f1_mean: ModeProfile) -> ModeProfile:
    """Horizontally averaged stream correction from the mean forcing.

    The zero mode satisfies -psi'''' = -f1' with psi and psi' vanishing at
    both walls, which pins the flux correction to zero.  Integrating three
    times from y = -1 gives psi = T + (A1/6)(y+1)^3 + (A2/2)(y+1)^2 with the
    two constants fixed by the wall conditions at y = +1.
    """
    t3, a1, a2 = _zero_mode_pieces(f1_mean)
    y = f1_mean.grid.nodes
    psi = t3.samples + (a1 / 6.0) * (y + 1.0) ** 3 + (a2 / 2.0) * (y + 1.0) ** 2
    return ModeProfile(f1_mean.grid, psi, 0.0)


# --- integral balance checks -------------------------------------------------

def _inner(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.dot(w, a * np.conjugate(b)))


def energy_identity_report(params: ChannelParams, f: ModeProfile,
                           result: LinearSolveResult) -> dict[str, float]:
    """Relative defects of the four exact integral balances of slip solutions.

    Each balance comes from testing the equation against conj(psi) or
    conj(psi'') and taking real or imaginary parts.  The weighted imaginary
    curvature balance carries + Im(f, psi'') on the right: testing against
    the second derivative and integrating by parts twice flips that sign
    relative to the psi-tested balance, which is easy to get backwards.
    """
    g = f.grid
    w = g.weights
    y = g.nodes
    nh = params.nhat
    phi = params.phi
    du = -1.5 * phi * y
    wgt = 1.0 - y * y

    psi = result.psi.samples
    p1 = differentiate(result.psi, 1).samples
    p2 = differentiate(result.psi, 2).samples
    p3 = differentiate(result.psi, 3).samples
    fs = f.samples

    def sq(a: np.ndarray) -> np.ndarray:
        return np.abs(a) ** 2

    def rel(lhs: float, rhs: float) -> float:
        return abs(lhs - rhs) / max(abs(lhs), abs(rhs), _TINY)

    report: dict[str, float] = {}

    lhs = float(np.dot(w, nh ** 4 * sq(psi) + 2 * nh ** 2 * sq(p1) + sq(p2)))
    rhs = -_inner(w, fs, psi).real + nh * _inner(w, du * p1, psi).imag
    report["energy_real"] = rel(lhs, rhs)

    lhs = 0.75 * phi * nh * float(np.dot(w, (nh ** 2 * sq(psi) + sq(p1)) * wgt))
    rhs = -_inner(w, fs, psi).imag + 0.75 * phi * nh * float(np.dot(w, sq(psi)))
    report["energy_imag"] = rel(lhs, rhs)

    lhs = float(np.dot(w, nh ** 4 * sq(p1) + 2 * nh ** 2 * sq(p2) + sq(p3)))
    rhs = _inner(w, fs, p2).real + nh ** 3 * _inner(w, du * psi, p1).imag
    report["curvature_real"] = rel(lhs, rhs)

    lhs = 0.75 * phi * nh * float(
        np.dot(w, (nh ** 2 * sq(p1) + sq(p2)) * wgt + nh ** 2 * sq(psi)))
    rhs = _inner(w, fs, p2).imag + 1.5 * phi * nh * float(np.dot(w, sq(p1)))
    report["curvature_imag"] = rel(lhs, rhs)

    return report


def weighted_coercivity_gap(params: ChannelParams, f: ModeProfile,
                            result: LinearSolveResult) -> tuple[float, float]:
    """One-sided weighted bound for even-forced slip solutions, L >= 1.

    Returns (lhs, rhs) of

        int (1/2) nh^2 |psi'|^2 (1-y^2) + 2*delta1 |psi''|^2 (1-y^2)
            + nh^2 |psi|^2 dy
        <= | (4 / (3 phi nh)) Im int f conj(psi'') dy |

    with delta = min(1/(4 L^2), 5/4) and delta1 = delta / 10.  The chain uses
    only absolute values, so it is insensitive to the orientation ambiguity
    of the weighted curvature balance.
    """
    if params.L < 1.0:
        raise ValueError("the one-sided weighted bound assumes L >= 1")
    g = f.grid
    w = g.weights
    y = g.nodes
    nh = params.nhat
    wgt = 1.0 - y * y
    delta = min(0.25 / params.L ** 2, 1.25)
    delta1 = delta / 10.0

    p1 = differentiate(result.psi, 1).samples
    p2 = differentiate(result.psi, 2).samples
    lhs = float(np.dot(w, 0.5 * nh ** 2 * np.abs(p1) ** 2 * wgt
                       + 2.0 * delta1 * np.abs(p2) ** 2 * wgt
                       + nh ** 2 * np.abs(result.psi.samples) ** 2))
    rhs = abs(4.0 / (3.0 * params.phi * nh) * _inner(w, f.samples, p2).imag)
    return lhs, rhs
