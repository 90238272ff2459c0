"""Boundary layer construction and the five-part wall-correction assembly.

Near each wall the advection-diffusion balance of one Fourier mode is
governed, after stretching by beta = |3 phi nhat / 2|^(1/3), by an Airy-type
profile: G_tilde(rho) = Ai(C (rho + d)) with C = e^{i pi/6} for n > 0 (its
conjugate for n < 0) annihilates the stretched wall operator exactly.  The
layer stream profile G solves G'' - lam^2 G = G_tilde, lam = |nhat|/beta,
decaying as rho -> infinity.

A mode solution with clamped walls is then reassembled from slip solves:
the slip part of the forcing, two cut-off wall layers (even and odd
combinations), two irrotational profiles e^{+-nhat y}, and slip-solved
corrections that restore the interior equation; two scalar coefficients per
parity are fixed by the wall values of psi and psi'.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .airy import airy_ai
from .channel import (
    BaseFlow,
    ChannelParams,
    ForcingMode,
    base_flow,
    layer_width,
    mode_rhs,
)
from .grid import (
    Grid,
    ModeProfile,
    build_grid,
    cheb_coefficients,
    cheb_nodes,
    coefficient_derivative,
    eval_coefficients,
    interpolate,
    parity_parts,
)
from .modesolve import LinearSolveResult, solve_slip

__all__ = [
    "DecompositionError",
    "BoundaryLayerProfile",
    "Decomposition",
    "cutoff_jet",
    "bl_profile",
    "assemble_decomposition",
    "wall_slope_ratio",
    "clamped_equivalence_defect",
]

_DECAY_ANCHOR = 8.0  # rho from which the exponential tail bound is recorded


class DecompositionError(RuntimeError):
    """Coefficient system for the wall corrections is near-degenerate."""


# --- smooth cutoffs ----------------------------------------------------------

def _sigma_jet(t: np.ndarray) -> np.ndarray:
    """exp(-1/t) for t > 0 (else 0) with derivatives through order 4."""
    out = np.zeros((5, len(t)))
    pos = t > 0.0
    tp = t[pos]
    s = np.exp(-1.0 / tp)
    u = 1.0 / tp
    out[0, pos] = s
    out[1, pos] = s * u ** 2
    out[2, pos] = s * (u ** 4 - 2 * u ** 3)
    out[3, pos] = s * (u ** 6 - 6 * u ** 5 + 6 * u ** 4)
    out[4, pos] = s * (u ** 8 - 12 * u ** 7 + 36 * u ** 6 - 24 * u ** 5)
    return out


def _jet_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Leibniz division of derivative jets: q with num = den * q."""
    q = np.zeros_like(num)
    q[0] = num[0] / den[0]
    for k in range(1, num.shape[0]):
        acc = num[k].copy()
        for j in range(1, k + 1):
            acc -= comb(k, j) * den[j] * q[k - j]
        q[k] = acc / den[0]
    return q


def cutoff_jet(y: np.ndarray, side: int) -> np.ndarray:
    """Derivatives 0..4 of the wall cutoff for the given side (+1 or -1).

    The positive-side cutoff vanishes for y <= 1/4 and is 1 for y >= 1/2;
    the negative side is its mirror image.
    """
    if side not in (1, -1):
        raise ValueError(f"side must be +1 or -1, got {side}")
    y = np.asarray(y, dtype=float)
    t = 4.0 * side * y - 1.0
    jet = np.zeros((5, len(t)))
    lo = t <= 0.0
    hi = t >= 1.0
    mid = ~(lo | hi)
    jet[0, hi] = 1.0
    if np.any(mid):
        tm = t[mid]
        s = _sigma_jet(tm)
        s_mirror = _sigma_jet(1.0 - tm)
        s_mirror[1::2] *= -1.0
        sm = _jet_divide(s, s + s_mirror)
        scale = 1.0
        for k in range(5):
            jet[k, mid] = sm[k] * scale
            scale *= 4.0 * side
    return jet


# --- wall layer ODE ----------------------------------------------------------

@dataclass
class BoundaryLayerProfile:
    """Stretched wall profile G and its derivatives on [0, rho_max].

    ``g``..``g3`` are nodal samples on the internal solve grid, which covers
    [0, rho_cut]; the profile is identically zero (to double precision)
    beyond rho_cut.  ``residual`` is the defect of G'' - lam^2 G = G_tilde
    measured against freshly evaluated Airy data on a doubled grid.
    """

    nhat: float
    beta: float
    lam: float
    side_phase: complex
    offset: complex
    rho_max: float
    rho_cut: float
    c0: complex
    rho: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    g1: np.ndarray = field(repr=False)
    g2: np.ndarray = field(repr=False)
    g3: np.ndarray = field(repr=False)
    gtilde: np.ndarray = field(repr=False)
    residual: float = 0.0
    decay_bound: dict[int, float] = field(default_factory=dict)
    _grid: Optional[Grid] = field(default=None, repr=False)

    def gtilde_at(self, rho: np.ndarray, order: int = 0) -> np.ndarray:
        """Fresh Airy evaluation of the stretched forcing profile."""
        rho = np.asarray(rho, dtype=float)
        out = np.zeros(rho.shape, dtype=complex)
        c = self.side_phase
        for i, r in enumerate(rho.ravel()):
            z = c * (r + self.offset)
            val = airy_ai(z)
            if order == 0:
                out.ravel()[i] = val.ai
            elif order == 1:
                out.ravel()[i] = c * val.ai_prime
            elif order == 2:
                out.ravel()[i] = c ** 3 * (r + self.offset) * val.ai
            else:
                raise ValueError(f"gtilde derivatives go up to 2, got {order}")
        return out

    def _interp(self, samples: np.ndarray, rho: np.ndarray) -> np.ndarray:
        x = 2.0 * np.minimum(rho, self.rho_cut) / self.rho_cut - 1.0
        p = ModeProfile(self._grid, samples, 0.0)
        vals = interpolate(p, x)
        return np.where(rho > self.rho_cut, 0.0, vals)

    def eval(self, rho: np.ndarray, order: int = 0) -> np.ndarray:
        """G and derivatives through order 4 at arbitrary rho >= 0."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < -1e-9):
            raise ValueError("profile is defined for rho >= 0")
        rho = np.maximum(rho, 0.0)
        if order == 0:
            return self._interp(self.g, rho)
        if order == 1:
            return self._interp(self.g1, rho)
        live = rho <= self.rho_cut
        out = np.zeros(rho.shape, dtype=complex)
        if not np.any(live):
            return out
        r = rho[live]
        gv = self._interp(self.g, r)
        gt = self.gtilde_at(r)
        if order == 2:
            out[live] = self.lam ** 2 * gv + gt
        elif order == 3:
            out[live] = (self.lam ** 2 * self._interp(self.g1, r)
                         + self.gtilde_at(r, 1))
        elif order == 4:
            out[live] = (self.lam ** 4 * gv + self.lam ** 2 * gt
                         + self.gtilde_at(r, 2))
        else:
            raise ValueError(f"derivative order must be 0..4, got {order}")
        return out


def _mapped_first_derivative(grid: Grid, half_width: float) -> np.ndarray:
    return grid.diff[0] / half_width


def _solve_first_order(a: np.ndarray, rhs: np.ndarray, lam_term: np.longdouble,
                       scale_d: np.longdouble, order: int) -> np.ndarray:
    """Dirichlet-at-row-0 solve of (d/drho + lam_term) x = rhs, refined.

    The LU runs in double on an equilibrated copy; iterative refinement with
    the residual taken in long double through coefficient space leaves samples
    whose stored rounding does not pollute later differentiation.
    """
    row = np.max(np.abs(a), axis=1)
    row[row == 0.0] = 1.0
    col = np.max(np.abs(a / row[:, None]), axis=0)
    col[col == 0.0] = 1.0
    lu = lu_factor((a / row[:, None]) / col[None, :])

    def precond(res: np.ndarray) -> np.ndarray:
        return lu_solve(lu, res / row) / col

    def apply_ld(x: np.ndarray) -> np.ndarray:
        dx = eval_coefficients(
            coefficient_derivative(cheb_coefficients(x)), order) * scale_d
        out = dx + lam_term * x
        out[0] = x[0]
        return out

    rhs_ld = rhs.astype(np.clongdouble)
    x = precond(rhs_ld.astype(complex)).astype(np.clongdouble)
    best = np.inf
    for _ in range(8):
        res = rhs_ld - apply_ld(x)
        err = float(np.max(np.abs(res)))
        if not np.isfinite(err) or err >= 0.9 * best:
            break
        best = err
        x = x + precond(res.astype(complex)).astype(np.clongdouble)
    return x


def bl_profile(params: ChannelParams, rho_max: Optional[float] = None,
               n_rho: int = 256) -> BoundaryLayerProfile:
    """Solve the stretched wall-layer problem for one mode.

    The decaying solution of G'' - lam^2 G = G_tilde factors through
    H(rho) = integral of e^{-lam (s - rho)} G_tilde(s): first
    (d/drho - lam) H = -G_tilde with H -> 0 at the far end, then
    (d/drho + lam) G = -H with G -> 0.  Both first-order solves carry only
    bounded amplification, unlike the direct two-point problem whose
    decaying mode is ill-conditioned over a long interval.
    """
    if params.n == 0:
        raise ValueError("the zero mode has no wall layer")
    if params.phi == 0.0:
        raise ValueError("wall layer requires positive flux")
    beta = layer_width(params)
    if rho_max is None:
        rho_max = max(40.0, 3.0 * beta)
    if rho_max < 16.0:
        raise ValueError(
            f"rho_max={rho_max} does not reach the decay regime (need >= 16)")
    lam = abs(params.nhat) / beta
    phase = np.exp(1j * np.pi / 6) if params.n > 0 else np.exp(-1j * np.pi / 6)
    offset = -2j * beta * params.nhat / (3.0 * params.phi)
    rho_cut = min(rho_max, 48.0)

    g = build_grid(n_rho)
    rho = rho_cut * (g.nodes + 1.0) / 2.0           # descending from rho_cut to 0
    d1 = _mapped_first_derivative(g, rho_cut / 2.0)

    shell = BoundaryLayerProfile(
        nhat=params.nhat, beta=beta, lam=lam, side_phase=complex(phase),
        offset=complex(offset), rho_max=float(rho_max), rho_cut=float(rho_cut),
        c0=1.0, rho=rho, g=np.zeros_like(rho, dtype=complex),
        g1=np.zeros_like(rho, dtype=complex),
        g2=np.zeros_like(rho, dtype=complex),
        g3=np.zeros_like(rho, dtype=complex),
        gtilde=np.zeros_like(rho, dtype=complex), _grid=g,
    )
    gt = shell.gtilde_at(rho)
    m = len(rho)
    lam_ld = np.longdouble(lam)
    scale_d = np.longdouble(2.0) / np.longdouble(rho_cut)

    a_h = d1 - lam * np.eye(m)
    rhs_h = -gt.astype(complex)
    a_h[0, :] = 0.0
    a_h[0, 0] = 1.0
    rhs_h[0] = 0.0
    h = _solve_first_order(a_h, rhs_h, -lam_ld, scale_d, n_rho)

    a_g = d1 + lam * np.eye(m)
    a_g[0, :] = 0.0
    a_g[0, 0] = 1.0
    rhs_g = -h
    rhs_g[0] = 0.0
    gv = _solve_first_order(a_g, rhs_g, lam_ld, scale_d, n_rho)

    g1 = -h - lam_ld * gv
    g2 = lam_ld ** 2 * gv + gt
    g3 = lam_ld ** 2 * g1 + shell.gtilde_at(rho, 1)

    shell.g = gv.astype(complex)
    shell.g1 = g1.astype(complex)
    shell.g2 = g2.astype(complex)
    shell.g3 = g3.astype(complex)
    shell.gtilde = gt

    g0 = shell.g[-1]
    shell.c0 = 1.0 / g0 if abs(g0) >= 1.0 else 1.0 + 0.0j

    # Defect of G'' - lam^2 G = G_tilde against freshly computed Airy values
    # on a doubled grid.  The second derivative is taken on the Chebyshev
    # coefficients of the long-double samples; differentiating the rounded
    # double image would sit near the 1e-9 gate at this resolution.
    fine_order = 2 * n_rho
    series = cheb_coefficients(gv)
    g_f = eval_coefficients(series, fine_order)
    g2_f = eval_coefficients(
        coefficient_derivative(coefficient_derivative(series)), fine_order
    ) * scale_d ** 2
    rho_f = rho_cut * (cheb_nodes(fine_order) + 1.0) / 2.0
    gt_f = shell.gtilde_at(rho_f)
    scale = max(float(np.max(np.abs(gt))), 1e-300)
    shell.residual = float(
        np.max(np.abs(g2_f - lam_ld ** 2 * g_f - gt_f))) / scale

    window = (rho >= _DECAY_ANCHOR) & (rho <= 3.0 * _DECAY_ANCHOR)
    for k, arr in enumerate((shell.g, shell.g1, shell.g2, shell.g3)):
        if np.any(window):
            shell.decay_bound[k] = float(
                np.max(np.exp(rho[window]) * np.abs(arr[window])))
    return shell


def wall_slope_ratio(profile: BoundaryLayerProfile) -> float:
    """|d/dy of the scaled layer at the wall| / beta = |c0 G'(0)|."""
    return float(abs(profile.c0 * profile.g1[-1]))


# --- five-part assembly ------------------------------------------------------

@dataclass
class Decomposition:
    params: ChannelParams
    profile: BoundaryLayerProfile
    psi_s: ModeProfile
    psi_bl_e: ModeProfile
    psi_bl_o: ModeProfile
    psi_e_e: ModeProfile
    psi_e_o: ModeProfile
    psi_p_e: ModeProfile
    psi_p_o: ModeProfile
    psi_r_e: ModeProfile
    psi_r_o: ModeProfile
    a_e: complex
    a_o: complex
    b_e: complex
    b_o: complex
    total: ModeProfile
    diagnostics: dict[str, float]


def _wall_jet(profile: BoundaryLayerProfile, y: np.ndarray, side: int) -> np.ndarray:
    """Derivatives 0..4 of c0 * G(beta * (1 - side*y)) at the nodes."""
    rho = profile.beta * (1.0 - side * y)
    jet = np.zeros((5, len(y)), dtype=complex)
    factor = 1.0
    for k in range(5):
        jet[k] = profile.c0 * factor * profile.eval(rho, k)
        factor *= -side * profile.beta
    return jet


def _leibniz(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(b)
    for k in range(a.shape[0]):
        for j in range(k + 1):
            out[k] += comb(k, j) * a[j] * b[k - j]
    return out


def _stream_rhs_of_jet(jet: np.ndarray, params: ChannelParams,
                       base: BaseFlow) -> np.ndarray:
    """-L[psi] for a nodal derivative jet: the forcing its correction must solve."""
    nh = params.nhat
    u = base.u.samples.real
    d2u = base.d2u.samples.real
    lap = jet[2] - nh ** 2 * jet[0]
    bilap = jet[4] - 2.0 * nh ** 2 * jet[2] + nh ** 4 * jet[0]
    return 1j * nh * d2u * jet[0] - 1j * nh * u * lap + bilap


def assemble_decomposition(params: ChannelParams, forcing: ForcingMode,
                           base: Optional[BaseFlow] = None) -> Decomposition:
    """Build the five-part clamped solution of one nonzero mode.

    Raises DecompositionError when the 2x2 wall-matching system for a parity
    is near-degenerate (|denominator| below 1e-6 * beta).
    """
    if params.n == 0:
        raise ValueError("decomposition applies to nonzero modes only")
    if abs(params.nhat) > 700.0:
        raise ValueError(
            f"irrotational profiles overflow at nhat={params.nhat}")
    grid = forcing.f1.grid
    if base is None:
        base = base_flow(params.phi, grid)
    y = grid.nodes
    nh = params.nhat

    f = mode_rhs(forcing)
    f_even, f_odd = parity_parts(f)
    f_scale = max(float(np.max(np.abs(f.samples))), 1e-300)

    profile = bl_profile(params)
    beta = profile.beta
    jet_plus = _leibniz(cutoff_jet(y, +1), _wall_jet(profile, y, +1))
    jet_minus = _leibniz(cutoff_jet(y, -1), _wall_jet(profile, y, -1))
    jets = {"even": jet_plus + jet_minus, "odd": jet_plus - jet_minus}

    exp_plus = np.exp(nh * y)
    exp_minus = np.exp(-nh * y)
    irrot = {"even": exp_plus + exp_minus, "odd": exp_plus - exp_minus}
    irrot_d = {"even": nh * (exp_plus - exp_minus), "odd": nh * (exp_plus + exp_minus)}

    w_bl1 = complex(profile.c0 * profile.g[-1])       # layer value at the wall
    d_bl1 = complex(-beta * profile.c0 * profile.g1[-1])

    zero = ModeProfile(grid, np.zeros_like(y, dtype=complex), nh)
    parts: dict[str, dict[str, ModeProfile]] = {}
    coeffs: dict[str, tuple[complex, complex]] = {}
    psi_s_total = np.zeros_like(y, dtype=complex)
    diagnostics: dict[str, float] = {
        "beta": float(beta),
        "c0_abs": float(abs(profile.c0)),
        "wall_slope_abs": float(abs(d_bl1)),
        "wall_slope_ratio": wall_slope_ratio(profile),
        "layer_residual": profile.residual,
    }

    for label, f_par in (("even", f_even), ("odd", f_odd)):
        if float(np.max(np.abs(f_par.samples))) <= 1e-15 * f_scale:
            parts[label] = {"bl": zero, "e": zero, "p": zero, "r": zero, "s": zero}
            coeffs[label] = (0.0 + 0.0j, 0.0 + 0.0j)
            continue
        slip = solve_slip(params, f_par, base)
        psi_s_total += slip.psi.samples

        jet = jets[label]
        bl_psi = ModeProfile(grid, jet[0], nh)
        q_bl = ModeProfile(grid, _stream_rhs_of_jet(jet, params, base), nh)
        corr_e = solve_slip(params, q_bl, base)

        p_psi = ModeProfile(grid, irrot[label].astype(complex), nh)
        rhs_r = ModeProfile(grid, 1j * nh * base.d2u.samples * irrot[label], nh)
        corr_r = solve_slip(params, rhs_r, base)

        p1 = complex(irrot[label][0])
        dp1 = complex(irrot_d[label][0])
        ds1 = slip.wall_derivatives[0]
        de1 = corr_e.wall_derivatives[0]
        dr1 = corr_r.wall_derivatives[0]
        denom = w_bl1 * (dp1 + dr1) / p1 - d_bl1 - de1
        if abs(denom) < 1e-6 * beta:
            raise DecompositionError(
                f"{label} wall-matching denominator {abs(denom):.3e} "
                f"below 1e-6 * beta = {1e-6 * beta:.3e}")
        b = ds1 / denom
        a = -w_bl1 * b / p1
        parts[label] = {"bl": bl_psi, "e": corr_e.psi, "p": p_psi,
                        "r": corr_r.psi, "s": slip.psi}
        coeffs[label] = (complex(a), complex(b))
        diagnostics[f"denom_{label}"] = float(abs(denom))

    total = psi_s_total.copy()
    for label in ("even", "odd"):
        a, b = coeffs[label]
        total += b * (parts[label]["bl"].samples + parts[label]["e"].samples)
        total += a * (parts[label]["p"].samples + parts[label]["r"].samples)

    return Decomposition(
        params=params,
        profile=profile,
        psi_s=ModeProfile(grid, psi_s_total, nh),
        psi_bl_e=parts["even"]["bl"],
        psi_bl_o=parts["odd"]["bl"],
        psi_e_e=parts["even"]["e"],
        psi_e_o=parts["odd"]["e"],
        psi_p_e=parts["even"]["p"],
        psi_p_o=parts["odd"]["p"],
        psi_r_e=parts["even"]["r"],
        psi_r_o=parts["odd"]["r"],
        a_e=coeffs["even"][0],
        a_o=coeffs["odd"][0],
        b_e=coeffs["even"][1],
        b_o=coeffs["odd"][1],
        total=ModeProfile(grid, total, nh),
        diagnostics=diagnostics,
    )


def clamped_equivalence_defect(dec: Decomposition,
                               clamped: LinearSolveResult) -> float:
    """Relative sup-norm gap between the assembled total and a direct solve."""
    ref = max(float(np.max(np.abs(clamped.psi.samples))), 1e-300)
    return float(np.max(np.abs(dec.total.samples - clamped.psi.samples))) / ref
