"""Parameter sweeps against the a priori bounds, and integral-inequality checks.

A sweep row solves one (phi, L, n, forcing) instance, measures the norm
quantities the theory controls, and divides each by its predicted bound
expression so boundedness shows up as O(1) ratios and scaling laws show up
as flat ratio columns.  Forcing shapes are drawn once per trial as
polynomial coefficients, so the same physical forcing is realized across
every grid in the sweep and slope fits compare like with like.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import legendre as npleg

from .blayer import assemble_decomposition, clamped_equivalence_defect
from .channel import (
    ChannelParams,
    ForcingMode,
    RegimeThresholds,
    base_flow,
    mode_rhs,
    resolution_for,
    velocity_of,
)
from .grid import ModeProfile, build_grid, differentiate, parity_parts
from .modesolve import solve_clamped, solve_slip

__all__ = [
    "ForcingRecipe",
    "SweepRow",
    "LemmaReport",
    "random_recipe",
    "canonical_recipe",
    "sweep",
    "fit_exponent",
    "ratio_spread",
    "verify_appendix",
]

SOLVERS = ("clamped", "slip", "decomposition", "high_freq")


@dataclass(frozen=True)
class ForcingRecipe:
    """Grid-independent forcing shape: two polynomials times (1 - y^2)."""

    label: str
    c1: tuple[complex, ...]
    c2: tuple[complex, ...]

    def realize(self, grid, nhat: float) -> ForcingMode:
        y = grid.nodes
        env = 1.0 - y * y
        f1 = env * np.polyval(list(self.c1)[::-1], y)
        f2 = env * np.polyval(list(self.c2)[::-1], y)
        return ForcingMode(ModeProfile(grid, f1, nhat), ModeProfile(grid, f2, nhat))


def random_recipe(rng: np.random.Generator, label: str, degree: int = 10,
                  ) -> ForcingRecipe:
    def draw() -> tuple[complex, ...]:
        re = rng.standard_normal(degree + 1)
        im = rng.standard_normal(degree + 1)
        return tuple(re + 1j * im)

    return ForcingRecipe(label=label, c1=draw(), c2=draw())


def canonical_recipe() -> ForcingRecipe:
    # even horizontal push (1-y^2), odd vertical push y*(1-y^2)
    return ForcingRecipe(label="canonical",
                         c1=(1.0, 0.0), c2=(0.0, 1.0))


@dataclass
class SweepRow:
    phi: float
    L: float
    n: int
    nhat: float
    forcing_id: str
    solver: str
    measured: dict[str, float] = field(default_factory=dict)
    ratios: dict[str, float] = field(default_factory=dict)


def _norm_sq(w: np.ndarray, a: np.ndarray) -> float:
    return float(np.dot(w, np.abs(a) ** 2))


def _stream_measures(params: ChannelParams, psi: ModeProfile) -> dict[str, float]:
    w = psi.grid.weights
    nh = params.nhat
    p0 = psi.samples
    p1 = differentiate(psi, 1).samples
    p2 = differentiate(psi, 2).samples
    p3 = differentiate(psi, 3).samples
    m = {
        "psi_l2": np.sqrt(_norm_sq(w, p0)),
        "grad_sq": _norm_sq(w, p1) + nh ** 2 * _norm_sq(w, p0),
        "hess_sq": (_norm_sq(w, p2) + nh ** 2 * _norm_sq(w, p1)
                    + nh ** 4 * _norm_sq(w, p0)),
        "third_sq": (_norm_sq(w, p3) + nh ** 2 * _norm_sq(w, p2)
                     + nh ** 4 * _norm_sq(w, p1) + nh ** 6 * _norm_sq(w, p0)),
    }
    return {k: float(v) for k, v in m.items()}


def _velocity_measures(params: ChannelParams, psi: ModeProfile) -> dict[str, float]:
    w = psi.grid.weights
    nh = params.nhat
    v1, v2 = velocity_of(psi)
    l2 = h1x = 0.0
    d1s, d2s = [], []
    for comp in (v1, v2):
        d1 = differentiate(comp).samples
        d2 = differentiate(comp, 2).samples
        l2 += _norm_sq(w, comp.samples)
        h1x += _norm_sq(w, d1)
        d1s.append(d1)
        d2s.append(d2)
    h1_sq = l2 + nh ** 2 * l2 + h1x
    h2_sq = h1_sq + nh ** 4 * l2 + nh ** 2 * h1x + sum(_norm_sq(w, d) for d in d2s)
    v_l2 = float(np.sqrt(l2))
    v_h1 = float(np.sqrt(h1_sq))
    v_h2 = float(np.sqrt(h2_sq))
    return {
        "v_l2": v_l2,
        "v_h1": v_h1,
        "v_h2": v_h2,
        "v_h53": float(v_h1 ** (1.0 / 3.0) * v_h2 ** (2.0 / 3.0)),
    }


def _weighted_measures(params: ChannelParams, psi: ModeProfile) -> dict[str, float]:
    w = psi.grid.weights
    y = psi.grid.nodes
    env = 1.0 - y * y
    nh = abs(params.nhat)
    p0 = psi.samples
    p1 = differentiate(psi).samples
    weighted = (params.phi * nh * float(np.dot(w, env * np.abs(p1) ** 2))
                + params.phi * nh ** 3 * float(np.dot(w, env * np.abs(p0) ** 2)))
    return {"weighted_sq": weighted}


def _row_clamped(params: ChannelParams, forcing: ForcingMode,
                 row: SweepRow) -> None:
    base = base_flow(params.phi, forcing.f1.grid)
    res = solve_clamped(params, mode_rhs(forcing), base)
    f_norm = forcing.l2_norm()
    g = abs(params.phi * params.nhat)
    one_l = 1.0 + params.L
    row.measured.update(_stream_measures(params, res.psi))
    row.measured.update(_velocity_measures(params, res.psi))
    row.measured["rhs_norm"] = f_norm
    row.measured["residual"] = res.residual
    row.ratios = {
        "grad_bound": row.measured["grad_sq"] / (one_l ** 2 / g * f_norm ** 2),
        "third_bound": row.measured["third_sq"]
        / (one_l ** (5 / 3) * g ** (1 / 6) * f_norm ** 2),
        "v_l2_bound": row.measured["v_l2"] / (one_l * g ** -0.5 * f_norm),
        "v_h2_bound": row.measured["v_h2"]
        / (one_l ** (5 / 6) * g ** (1 / 12) * f_norm),
        "v_h53_bound": row.measured["v_h53"] / f_norm,
    }


def _row_slip(params: ChannelParams, forcing: ForcingMode, row: SweepRow,
              parity: Optional[str]) -> None:
    base = base_flow(params.phi, forcing.f1.grid)
    f = mode_rhs(forcing)
    if parity is not None:
        even, odd = parity_parts(f)
        f = even if parity == "even" else odd
        row.forcing_id = f"{row.forcing_id}:{parity}"
    res = solve_slip(params, f, base)
    f_norm = float(np.sqrt(_norm_sq(forcing.f1.grid.weights, f.samples)))
    g = abs(params.phi * params.nhat)
    one_l = 1.0 + params.L
    row.measured.update(_stream_measures(params, res.psi))
    row.measured["rhs_norm"] = f_norm
    row.measured["residual"] = res.residual
    if parity == "odd":
        row.ratios = {
            "odd_grad_bound": row.measured["grad_sq"] / (g ** (-5 / 3) * f_norm ** 2),
            "odd_hess_bound": row.measured["hess_sq"] / (g ** (-4 / 3) * f_norm ** 2),
            "odd_third_bound": row.measured["third_sq"] / (g ** (-2 / 3) * f_norm ** 2),
        }
    elif parity == "even":
        row.ratios = {
            "even_grad_bound": row.measured["grad_sq"]
            / (one_l ** (10 / 3) * g ** (-5 / 3) * f_norm ** 2),
            "even_hess_bound": row.measured["hess_sq"]
            / (one_l ** (8 / 3) * g ** (-4 / 3) * f_norm ** 2),
            "even_third_bound": row.measured["third_sq"]
            / (one_l ** (4 / 3) * g ** (-2 / 3) * f_norm ** 2),
        }
    else:
        big_f = forcing.l2_norm()
        row.measured["forcing_norm"] = big_f
        row.ratios = {
            "grad_bound": row.measured["grad_sq"] / (one_l ** 2 / g * big_f ** 2),
            "hess_bound": row.measured["hess_sq"]
            / (one_l ** (4 / 3) * g ** (-2 / 3) * big_f ** 2),
            "third_bound": row.measured["third_sq"] / big_f ** 2,
        }


def _row_decomposition(params: ChannelParams, forcing: ForcingMode,
                       row: SweepRow) -> None:
    base = base_flow(params.phi, forcing.f1.grid)
    dec = assemble_decomposition(params, forcing, base)
    clamped = solve_clamped(params, mode_rhs(forcing), base)
    f_norm = forcing.l2_norm()
    g = abs(params.phi * params.nhat)
    one_l = 1.0 + params.L
    bound_b = one_l ** (5 / 6) * g ** (-3 / 4) * f_norm
    bound_a = bound_b * np.exp(-abs(params.nhat))
    # parity pieces are bounded separately, so their sum obeys the same shape
    coef_a = abs(dec.a_e) + abs(dec.a_o)
    coef_b = abs(dec.b_e) + abs(dec.b_o)
    row.measured = {
        "coef_a_abs": float(coef_a),
        "coef_b_abs": float(coef_b),
        "equiv_defect": clamped_equivalence_defect(dec, clamped),
        "rhs_norm": f_norm,
        "beta": dec.diagnostics["beta"],
        "wall_slope_ratio": dec.diagnostics["wall_slope_ratio"],
        "layer_residual": dec.diagnostics["layer_residual"],
    }
    row.ratios = {
        "coef_b": float(coef_b / bound_b),
        "coef_a": float(coef_a / bound_a) if bound_a > 0 else float("inf"),
    }


def _row_high_freq(params: ChannelParams, forcing: ForcingMode,
                   row: SweepRow) -> None:
    grid = forcing.f1.grid
    base = base_flow(params.phi, grid)
    # hold the scalar mode right-hand side fixed across the frequency
    # window; a vector force realizing it at frequency nhat is
    # (0, f / (i nhat)), so the bound's forcing norm is ||f|| / |nhat|.
    # With the vector force held fixed instead, the advective interior
    # balance makes the stream H2 sum frequency-independent and the decay
    # exponent never shows.
    f_ref = 1j * forcing.f2.samples - differentiate(forcing.f1).samples
    res = solve_clamped(params, ModeProfile(grid, f_ref, params.nhat), base)
    f_norm = float(np.sqrt(_norm_sq(grid.weights, f_ref))) / abs(params.nhat)
    row.measured.update(_stream_measures(params, res.psi))
    row.measured.update(_weighted_measures(params, res.psi))
    row.measured["rhs_norm"] = f_norm
    row.measured["residual"] = res.residual
    hf_lhs = row.measured["weighted_sq"] + row.measured["hess_sq"]
    row.measured["hf_lhs"] = float(hf_lhs)
    row.ratios = {
        "high_freq_bound": float(hf_lhs / (abs(params.nhat) ** -2 * f_norm ** 2)),
    }


def sweep(phis, Ls, ns, solver: str, *, trials: int = 3, seed: int = 0,
          thresholds: Optional[RegimeThresholds] = None,
          parity: Optional[str] = None,
          ) -> tuple[list[SweepRow], list[dict]]:
    """Run the chosen solver over the parameter lattice.

    Returns (rows, skipped); a lattice point outside the solver's frequency
    regime is skipped with a reason rather than solved out of regime.
    """
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}, got {solver!r}")
    if parity not in (None, "even", "odd"):
        raise ValueError(f"parity must be None, 'even', or 'odd', got {parity!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    thr = thresholds if thresholds is not None else RegimeThresholds()
    recipes = [random_recipe(np.random.default_rng([seed, t]), f"random-{t}")
               for t in range(trials)]

    rows: list[SweepRow] = []
    skipped: list[dict] = []
    for phi in phis:
        for L in Ls:
            for n in ns:
                params = ChannelParams(float(phi), float(L), int(n))
                if solver == "high_freq":
                    ok = thr.in_high(params)
                    reason = "outside high-frequency regime"
                else:
                    ok = thr.in_intermediate(params)
                    reason = "outside intermediate regime"
                if not ok:
                    skipped.append({"phi": float(phi), "L": float(L),
                                    "n": int(n), "reason": reason})
                    continue
                grid = build_grid(resolution_for(params))
                for recipe in recipes:
                    forcing = recipe.realize(grid, params.nhat)
                    row = SweepRow(phi=float(phi), L=float(L), n=int(n),
                                   nhat=params.nhat, forcing_id=recipe.label,
                                   solver=solver)
                    if solver == "clamped":
                        _row_clamped(params, forcing, row)
                    elif solver == "slip":
                        _row_slip(params, forcing, row, parity)
                    elif solver == "decomposition":
                        _row_decomposition(params, forcing, row)
                    else:
                        _row_high_freq(params, forcing, row)
                    rows.append(row)
    return rows, skipped


def fit_exponent(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys) or len(xs) < 3:
        raise ValueError("need at least three matched samples")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ValueError("log-log fit needs positive data")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def ratio_spread(rows, key: str) -> float:
    """Max/min of one ratio column across rows.

    A single unspecified constant should cover every instance of a bound, so
    the spread of measured/bound is the boundedness gauge; callers compare it
    against a sanity factor (default 100).
    """
    vals = [float(r.ratios[key]) for r in rows if key in r.ratios]
    vals = [v for v in vals if np.isfinite(v) and v > 0.0]
    if not vals:
        raise ValueError(f"no finite positive ratios under key {key!r}")
    return float(max(vals) / min(vals))


# --- integral inequality checks ----------------------------------------------

@dataclass
class LemmaReport:
    name: str
    trials: int
    violations: int
    worst_margin: float
    constant: Optional[float] = None
    notes: dict[str, float] = field(default_factory=dict)


def _poly_samples(rng: np.random.Generator, y: np.ndarray, degree: int,
                  ) -> np.ndarray:
    return np.polyval(rng.standard_normal(degree + 1), y)


def verify_appendix(trials: int = 1000, seed: int = 0,
                    deltas: tuple[float, ...] = (0.25, 1.0, 1.9),
                    degree: int = 12) -> list[LemmaReport]:
    """Exercise the five integral inequalities on random polynomial ensembles.

    Hard inequalities (the two Dirichlet ones, the 1/3+92 weighted bound, and
    the odd weighted family) report violation counts; the boundary-trace and
    weighted-interpolation bounds carry non-constructive constants, so the
    empirical constant over the ensemble is recorded instead.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for d in deltas:
        # the odd weighted bound needs delta1 = min(delta/10, 1/3 - delta/6) > 0
        if not 0.0 < d < 2.0:
            raise ValueError(f"delta must lie in (0, 2), got {d}")
    grid = build_grid(64)
    y = grid.nodes
    w = grid.weights
    env = 1.0 - y * y
    d1, d2 = grid.diff[0], grid.diff[1]
    rng = np.random.default_rng(seed)

    reports: list[LemmaReport] = []

    # Dirichlet chain: ||g|| <= ||g'||, ||g'||^2 <= ||g''|| ||g||
    violations = 0
    worst = np.inf
    for _ in range(trials):
        g = env * _poly_samples(rng, y, degree)
        gp = d1 @ g
        gpp = d2 @ g
        a = float(np.dot(w, g * g))
        b = float(np.dot(w, gp * gp))
        c = float(np.dot(w, gpp * gpp))
        m1 = b - a
        m2 = np.sqrt(c * a) - b
        worst = min(worst, m1, m2)
        if m1 < -1e-12 * max(a, b) or m2 < -1e-12 * max(b, np.sqrt(a * c)):
            violations += 1
    reports.append(LemmaReport("dirichlet_chain", trials, violations, float(worst)))

    # boundary trace constant
    rng = np.random.default_rng(seed)
    best_c = 0.0
    for _ in range(trials):
        g = env * _poly_samples(rng, y, degree)
        gp = d1 @ g
        gpp = d2 @ g
        b = float(np.dot(w, gp * gp))
        c = float(np.dot(w, gpp * gpp))
        denom = b ** 0.25 * c ** 0.25
        if denom > 0.0:
            best_c = max(best_c, abs(gp[0]) / denom, abs(gp[-1]) / denom)
    reports.append(LemmaReport("boundary_trace", trials, 0, 0.0, constant=float(best_c)))

    # weighted interpolation constant (smallest C <= 100 covering the ensemble)
    rng = np.random.default_rng(seed)
    best_c = 0.0
    for _ in range(trials):
        g = _poly_samples(rng, y, degree)
        gp = d1 @ g
        a = float(np.dot(w, g * g))
        wt = float(np.dot(w, env * g * g))
        b = float(np.dot(w, gp * gp))
        denom = wt ** (2 / 3) * b ** (1 / 3) + wt
        if denom > 0.0:
            best_c = max(best_c, a / denom)
    rep = LemmaReport("weighted_interpolation", trials, 0, 0.0,
                      constant=float(best_c))
    rep.notes["within_100"] = 1.0 if best_c <= 100.0 else 0.0
    reports.append(rep)

    # weighted Dirichlet-free bound with (1/3, 92)
    rng = np.random.default_rng(seed)
    violations = 0
    worst = np.inf
    for _ in range(trials):
        g = _poly_samples(rng, y, degree)
        gp = d1 @ g
        a = float(np.dot(w, g * g))
        rhs = (float(np.dot(w, env * gp * gp)) / 3.0
               + 92.0 * float(np.dot(w, env * g * g)))
        worst = min(worst, rhs - a)
        if a > rhs * (1.0 + 1e-12):
            violations += 1
    reports.append(LemmaReport("weighted_mass", trials, violations, float(worst)))

    # odd weighted family, one report per delta
    for delta in deltas:
        delta1 = min(delta / 10.0, 1.0 / 3.0 - delta / 6.0)
        rng = np.random.default_rng([seed, int(delta * 1000)])
        violations = 0
        worst = np.inf
        for _ in range(trials):
            p = _poly_samples(rng, y, degree)
            g = 0.5 * (p - p[::-1])
            gp = d1 @ g
            a = float(np.dot(w, g * g))
            rhs = ((0.5 - delta1) * float(np.dot(w, env * gp * gp))
                   + delta * float(np.dot(w, env * g * g)))
            worst = min(worst, rhs - a)
            if a > rhs * (1.0 + 1e-12):
                violations += 1
        rep = LemmaReport(f"odd_weighted_{delta}", trials, violations, float(worst))
        rep.notes["delta1"] = float(delta1)
        # scalar sufficient conditions behind the proof, recorded as margins
        rep.notes["scalar_low_margin"] = float(
            2.0 * (0.5 - delta1) - (1.0 - delta / 5.0))
        rep.notes["scalar_high_margin"] = float(
            6.0 * (0.5 - delta1) - (1.0 + delta))
        # sharpness probe: margins along g = P1_hat + eps * P3_hat
        p1_hat = np.sqrt(1.5) * y
        p3_hat = np.sqrt(3.5) * 0.5 * (5.0 * y ** 3 - 3.0 * y)
        for i, eps in enumerate((0.3, 0.1, 0.03)):
            g = p1_hat + eps * p3_hat
            gp = d1 @ g
            a = float(np.dot(w, g * g))
            rhs = ((0.5 - delta1) * float(np.dot(w, env * gp * gp))
                   + delta * float(np.dot(w, env * g * g)))
            rep.notes[f"sharpness_margin_{i}"] = float(rhs - a)
        reports.append(rep)

    # coefficient-level route behind the odd family: expand in normalized odd
    # Legendre modes P_hat_m, where ((1-y^2) P_hat_m')' = -m(m+1) P_hat_m,
    # and check Parseval, the weighted-derivative identity
    # int (1-y^2) g'^2 = sum m(m+1) C_m^2, and its mode-wise lower bound
    # 2 C_1^2 + 6 sum_{m>=3} C_m^2.
    rng = np.random.default_rng(seed)
    orders = np.arange(1, degree + 1, 2, dtype=float)
    phat = np.empty((len(orders), len(y)))
    for i, m in enumerate(orders.astype(int)):
        unit = np.zeros(m + 1)
        unit[m] = 1.0
        phat[i] = np.sqrt((2 * m + 1) / 2.0) * npleg.legval(y, unit)
    violations = 0
    worst = np.inf
    parseval = 0.0
    identity = 0.0
    for _ in range(trials):
        p = _poly_samples(rng, y, degree)
        g = 0.5 * (p - p[::-1])
        gp = d1 @ g
        c = phat @ (w * g)
        mass = float(np.dot(w, g * g))
        wder = float(np.dot(w, env * gp * gp))
        wscale = max(wder, 1e-30)
        parseval = max(parseval, abs(mass - float(np.dot(c, c))) / max(mass, 1e-30))
        identity = max(identity,
                       abs(wder - float(np.dot(orders * (orders + 1.0), c * c)))
                       / wscale)
        margin = wder - (2.0 * c[0] ** 2 + 6.0 * float(np.dot(c[1:], c[1:])))
        worst = min(worst, margin)
        if margin < -1e-10 * wscale:
            violations += 1
    rep = LemmaReport("odd_coefficient_form", trials, violations, float(worst))
    rep.notes["parseval_defect"] = float(parseval)
    rep.notes["weighted_identity_defect"] = float(identity)
    reports.append(rep)

    return reports
