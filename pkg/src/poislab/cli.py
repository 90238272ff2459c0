"""Command line front end: JSON config plus flag overrides, deterministic output.

Every command writes a ``summary.json`` (atomically, no timestamps) into the
output directory plus its own artifacts; reruns with the same seed produce
byte-identical files.  Exit codes: 0 all gates passed, 1 parameter or config
error, 2 a numerical gate failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .airy import AiryRangeError
from .blayer import (
    DecompositionError,
    assemble_decomposition,
    bl_profile,
    clamped_equivalence_defect,
)
from .channel import (
    ChannelParams,
    ForcingMode,
    RegimeThresholds,
    base_flow,
    mode_rhs,
    resolution_for,
)
from .grid import ModeProfile, build_grid
from .modesolve import SingularOperatorError, energy_identity_report, solve_clamped, solve_slip
from .nonlinear import picard_iterate, save_field, uniqueness_probe
from .scaling import canonical_recipe, fit_exponent, ratio_spread, sweep, verify_appendix

__all__ = ["RunSpec", "parse_config", "serialize", "run", "main"]

COMMANDS = (
    "solve-linear",
    "solve-nonlinear",
    "decompose",
    "sweep",
    "verify-lemmas",
    "probe-uniqueness",
    "bl-profile",
)

OUT_ENV = "POISLAB_OUT"


FORMATS = ("csv", "json", "profile-tables")


@dataclass
class RunSpec:
    """Complete, serializable description of one command invocation."""

    command: str
    phi: list[float] = field(default_factory=lambda: [1e5])
    L: list[float] = field(default_factory=lambda: [1.0])
    n: list[int] = field(default_factory=lambda: [1])
    solver: str = "clamped"
    parity: Optional[str] = None
    bc: str = "clamped"
    trials: Optional[int] = None
    seed: int = 0
    tol: float = 1e-9
    max_iter: int = 100
    n_x: int = 8
    grid_order: Optional[int] = None
    rho_max: Optional[float] = None
    amplitude: float = 1.0
    deltas: list[float] = field(default_factory=lambda: [0.25, 1.0, 1.9])
    c_tilde: float = 1.0
    eps1: float = 0.1
    formats: list[str] = field(default_factory=lambda: list(FORMATS))
    out: str = ""

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not self.out:
            self.out = os.environ.get(OUT_ENV, "runs")
        if not self.phi:
            raise ValueError("field phi: at least one flux value is required")
        if not self.L:
            raise ValueError("field L: at least one period value is required")
        if not self.n:
            raise ValueError("field n: at least one mode index is required")
        if not self.deltas:
            raise ValueError("field deltas: at least one value is required")
        if any(v < 0.0 for v in self.phi):
            raise ValueError("field phi: flux must be non-negative")
        if any(v <= 0.0 for v in self.L):
            raise ValueError("field L: period multiplier must be positive")
        if self.solver not in ("clamped", "slip", "decomposition", "high_freq"):
            raise ValueError(f"field solver: unknown solver {self.solver!r}")
        if self.parity not in (None, "even", "odd"):
            raise ValueError(f"field parity: must be even or odd, got {self.parity!r}")
        if self.bc not in ("clamped", "slip"):
            raise ValueError(f"field bc: must be clamped or slip, got {self.bc!r}")
        if self.trials is not None and self.trials < 1:
            raise ValueError("field trials: must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("field tol: must be positive")
        if self.max_iter < 1:
            raise ValueError("field max_iter: must be >= 1")
        if self.n_x < 1:
            raise ValueError("field n_x: must be >= 1")
        if self.grid_order is not None and (self.grid_order < 8
                                            or self.grid_order % 2):
            raise ValueError("field grid_order: must be an even integer >= 8")
        if self.amplitude <= 0.0:
            raise ValueError("field amplitude: must be positive")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad or not self.formats:
            raise ValueError(
                f"field formats: entries must come from {FORMATS}, got {self.formats}")

    def thresholds(self) -> RegimeThresholds:
        return RegimeThresholds(c_tilde=self.c_tilde, eps1=self.eps1)

    def resolved_trials(self) -> int:
        """Per-command default: lemma verification is cheap, sweeps are not."""
        if self.trials is not None:
            return self.trials
        return 1000 if self.command == "verify-lemmas" else 3


_FIELD_TYPES = {
    "command": str, "solver": str, "bc": str, "out": str,
    "parity": (str, type(None)),
    "trials": (int, type(None)), "seed": int, "max_iter": int, "n_x": int,
    "grid_order": (int, type(None)),
    "rho_max": (int, float, type(None)),
    "tol": (int, float), "amplitude": (int, float),
    "c_tilde": (int, float), "eps1": (int, float),
    "phi": list, "L": list, "n": list, "deltas": list, "formats": list,
}


def parse_config(text: str) -> RunSpec:
    """Parse a JSON config into a RunSpec, rejecting unknown or mistyped keys."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    known = {f.name for f in fields(RunSpec)}
    for key in raw:
        if key not in known:
            raise ValueError(f"unknown config field: {key}")
    if "command" not in raw:
        raise ValueError("config must set the field: command")
    for key, value in raw.items():
        expected = _FIELD_TYPES[key]
        if not isinstance(value, expected):
            raise ValueError(
                f"config field {key}: expected {expected}, got {type(value).__name__}")
        if isinstance(value, bool):
            raise ValueError(f"config field {key}: booleans are not accepted")
    coerced = dict(raw)
    for key in ("phi", "L", "deltas"):
        if key in coerced:
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in coerced[key]):
                raise ValueError(f"config field {key}: entries must be numbers")
            coerced[key] = [float(v) for v in coerced[key]]
    if "n" in coerced:
        if not all(isinstance(v, int) and not isinstance(v, bool)
                   for v in coerced["n"]):
            raise ValueError("config field n: entries must be integers")
        coerced["n"] = [int(v) for v in coerced["n"]]
    if "formats" in coerced:
        if not all(isinstance(v, str) for v in coerced["formats"]):
            raise ValueError("config field formats: entries must be strings")
        coerced["formats"] = [str(v) for v in coerced["formats"]]
    return RunSpec(**coerced)


def serialize(spec: RunSpec) -> str:
    return json.dumps(asdict(spec), sort_keys=True, indent=2) + "\n"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _pyify(obj):
    """Recursively strip numpy scalar types so json.dumps accepts the payload."""
    if isinstance(obj, dict):
        return {k: _pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pyify(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _write_json(path: str, payload) -> None:
    _atomic_write(path, json.dumps(_pyify(payload), sort_keys=True, indent=2) + "\n")


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    _atomic_write(path, buf.getvalue())


def _canonical_forcing(spec: RunSpec, params: ChannelParams, grid):
    forcing = canonical_recipe().realize(grid, params.nhat)
    norm = forcing.l2_norm()
    scale = spec.amplitude / norm if norm > 0 else 1.0
    f1 = forcing.f1.like(forcing.f1.samples * scale)
    f2 = forcing.f2.like(forcing.f2.samples * scale)
    return ForcingMode(f1, f2)


def _grid_for(spec: RunSpec, params: ChannelParams):
    order = spec.grid_order if spec.grid_order is not None else resolution_for(params)
    return build_grid(order)


# --- command bodies ----------------------------------------------------------

def _cmd_solve_linear(spec: RunSpec, outdir: str):
    solver = solve_clamped if spec.bc == "clamped" else solve_slip
    if spec.bc not in ("clamped", "slip"):
        raise ValueError(f"bc must be clamped or slip, got {spec.bc!r}")
    header = ["phi", "L", "n", "nhat", "grid_order", "residual", "bc_defect",
              "parity", "energy_real", "energy_imag", "curvature_real",
              "curvature_imag"]
    rows = []
    gates = {"residual": True, "bc_defect": True}
    profile_txt = None
    for phi in spec.phi:
        for L in spec.L:
            for n in spec.n:
                params = ChannelParams(phi, L, n)
                grid = _grid_for(spec, params)
                forcing = _canonical_forcing(spec, params, grid)
                f = mode_rhs(forcing)
                res = solver(params, f, base_flow(phi, grid))
                idents = {"energy_real": "", "energy_imag": "",
                          "curvature_real": "", "curvature_imag": ""}
                if spec.bc == "slip":
                    idents = energy_identity_report(params, f, res)
                    idents = {k: float(v) for k, v in idents.items()}
                gates["residual"] &= res.residual < 1e-9
                gates["bc_defect"] &= res.bc_defect < 1e-11
                rows.append([phi, L, n, params.nhat, grid.n, res.residual,
                             res.bc_defect, res.parity,
                             idents["energy_real"], idents["energy_imag"],
                             idents["curvature_real"], idents["curvature_imag"]])
                if profile_txt is None:
                    lines = ["y re_psi im_psi"]
                    for yv, pv in zip(grid.nodes, res.psi.samples):
                        lines.append(f"{yv!r} {pv.real!r} {pv.imag!r}")
                    profile_txt = "\n".join(lines) + "\n"
    if "csv" in spec.formats:
        _write_csv(os.path.join(outdir, "rows.csv"), header, rows)
    if profile_txt is not None and "profile-tables" in spec.formats:
        _atomic_write(os.path.join(outdir, "profile.txt"), profile_txt)
    return gates, {"rows": len(rows)}


def _cmd_decompose(spec: RunSpec, outdir: str):
    header = ["phi", "L", "n", "nhat", "grid_order", "beta", "abs_a_e", "abs_a_o",
              "abs_b_e", "abs_b_o", "equiv_defect", "wall_slope_ratio",
              "layer_residual"]
    rows = []
    gates = {"equivalence": True}
    worst = 0.0
    for phi in spec.phi:
        for L in spec.L:
            for n in spec.n:
                params = ChannelParams(phi, L, n)
                grid = _grid_for(spec, params)
                forcing = _canonical_forcing(spec, params, grid)
                base = base_flow(phi, grid)
                dec = assemble_decomposition(params, forcing, base)
                clamped = solve_clamped(params, mode_rhs(forcing), base)
                defect = clamped_equivalence_defect(dec, clamped)
                worst = max(worst, defect)
                gates["equivalence"] &= defect < 1e-6
                rows.append([phi, L, n, params.nhat, grid.n,
                             dec.diagnostics["beta"],
                             abs(dec.a_e), abs(dec.a_o),
                             abs(dec.b_e), abs(dec.b_o), defect,
                             dec.diagnostics["wall_slope_ratio"],
                             dec.diagnostics["layer_residual"]])
    if "csv" in spec.formats:
        _write_csv(os.path.join(outdir, "decomposition.csv"), header, rows)
    return gates, {"rows": len(rows), "worst_equiv_defect": worst}


def _cmd_sweep(spec: RunSpec, outdir: str):
    rows, skipped = sweep(spec.phi, spec.L, spec.n, spec.solver,
                          trials=spec.resolved_trials(), seed=spec.seed,
                          thresholds=spec.thresholds(), parity=spec.parity)
    if not rows:
        raise ValueError("sweep produced no rows (every point was skipped)")
    m_keys = sorted({k for r in rows for k in r.measured})
    r_keys = sorted({k for r in rows for k in r.ratios})
    header = (["phi", "L", "n", "nhat", "forcing_id", "solver"]
              + [f"measured_{k}" for k in m_keys] + [f"ratio_{k}" for k in r_keys])
    table = []
    for r in rows:
        table.append([r.phi, r.L, r.n, r.nhat, r.forcing_id, r.solver]
                     + [r.measured.get(k, "") for k in m_keys]
                     + [r.ratios.get(k, "") for k in r_keys])
    if "csv" in spec.formats:
        _write_csv(os.path.join(outdir, "rows.csv"), header, table)

    gates = {}
    metrics: dict = {"rows": len(rows), "skipped": skipped}
    res_vals = [r.measured["residual"] for r in rows if "residual" in r.measured]
    if res_vals:
        metrics["worst_residual"] = max(res_vals)
        gates["residual"] = metrics["worst_residual"] < 1e-9
    for key in r_keys:
        vals = [r.ratios[key] for r in rows if key in r.ratios]
        metrics[f"ratio_{key}_max"] = max(vals)
        metrics[f"ratio_{key}_min"] = min(vals)
        try:
            metrics[f"spread_{key}"] = ratio_spread(rows, key)
        except ValueError:
            pass
    metrics.update(_sweep_slopes(rows, m_keys))
    return gates, metrics


def _sweep_slopes(rows, m_keys) -> dict:
    """Log-log slopes of each measured norm along whichever axis was swept.

    A slope is only meaningful when one axis varies and the others are fixed,
    so each candidate axis is fitted only in that situation.
    """
    out: dict = {}
    axes = {
        "phi": lambda r: r.phi,
        "nhat": lambda r: r.nhat,
        "L": lambda r: r.L,
    }
    distinct = {name: sorted({ax(r) for r in rows}) for name, ax in axes.items()}
    for name, ax in axes.items():
        others = [o for o in axes if o != name]
        if len(distinct[name]) < 3:
            continue
        if any(len(distinct[o]) != 1 for o in others):
            continue
        for key in m_keys:
            pairs = [(ax(r), r.measured[key]) for r in rows
                     if key in r.measured and r.measured[key] > 0.0]
            if len({x for x, _ in pairs}) < 3:
                continue
            try:
                out[f"slope_{key}_vs_{name}"] = fit_exponent(
                    [x for x, _ in pairs], [y for _, y in pairs])
            except ValueError:
                continue
    return out


def _cmd_verify_lemmas(spec: RunSpec, outdir: str):
    reports = verify_appendix(trials=spec.resolved_trials(), seed=spec.seed,
                              deltas=tuple(spec.deltas))
    payload = [
        {"name": r.name, "trials": r.trials, "violations": r.violations,
         "worst_margin": r.worst_margin, "constant": r.constant,
         "notes": r.notes}
        for r in reports
    ]
    if "json" in spec.formats:
        _write_json(os.path.join(outdir, "lemmas.json"), payload)
    gates = {"no_violations": all(r.violations == 0 for r in reports)}
    for r in reports:
        if r.name == "weighted_interpolation":
            gates["interpolation_constant"] = (r.constant or np.inf) <= 100.0
    return gates, {"reports": len(reports)}


def _nonlinear_forcing(spec: RunSpec, grid, L: float):
    """Conjugate pair of modes +-1 whose strip-wide norm equals spec.amplitude."""
    params = ChannelParams(spec.phi[0], L, 1)
    fm = _canonical_forcing(spec, params, grid)
    circ = 2.0 * L * np.pi
    scale = 1.0 / np.sqrt(2.0 * circ)
    nh = params.nhat
    f1 = fm.f1.samples * scale
    f2 = fm.f2.samples * scale
    plus = ForcingMode(ModeProfile(grid, f1, nh), ModeProfile(grid, f2, nh))
    minus = ForcingMode(ModeProfile(grid, np.conj(f1), -nh),
                        ModeProfile(grid, np.conj(f2), -nh))
    return {1: plus, -1: minus}


def _cmd_solve_nonlinear(spec: RunSpec, outdir: str):
    phi, L = spec.phi[0], spec.L[0]
    params = ChannelParams(phi, L, max(spec.n_x, 1))
    grid = _grid_for(spec, params)
    forcing = _nonlinear_forcing(spec, grid, L)
    v, report = picard_iterate(phi, L, forcing, grid, spec.n_x,
                               tol=spec.tol, max_iter=spec.max_iter)
    if "json" in spec.formats:
        save_field(os.path.join(outdir, "field.json"), v, phi=phi)
    if "profile-tables" in spec.formats:
        trace = ["iteration delta"]
        trace += [f"{i + 1} {d!r}" for i, d in enumerate(report.deltas)]
        _atomic_write(os.path.join(outdir, "trace.txt"), "\n".join(trace) + "\n")
    payload = {
        "converged": report.converged,
        "stagnated": report.stagnated,
        "iterations": report.iterations,
        "contraction": report.contraction,
        "ns_residual": report.ns_residual,
        "norms": report.final_norms,
        "invariants": v.check_invariants(),
    }
    if "json" in spec.formats:
        _write_json(os.path.join(outdir, "report.json"), payload)
    gates = {
        "converged": report.converged,
        "residual": report.ns_residual < 10.0 * spec.tol,
    }
    return gates, payload


def _cmd_probe(spec: RunSpec, outdir: str):
    phi, L = spec.phi[0], spec.L[0]
    params = ChannelParams(phi, L, max(spec.n_x, 1))
    grid = _grid_for(spec, params)
    v, report = uniqueness_probe(phi, L, grid, spec.n_x,
                                 tol=spec.tol, max_iter=spec.max_iter)
    payload = {
        "converged": report.converged,
        "stagnated": report.stagnated,
        "iterations": report.iterations,
        "deltas": report.deltas,
        "norms": report.final_norms,
    }
    if "json" in spec.formats:
        _write_json(os.path.join(outdir, "report.json"), payload)
    gates = {"collapsed": report.final_norms["h1"] < 1e-10}
    return gates, payload


def _cmd_bl_profile(spec: RunSpec, outdir: str):
    params = ChannelParams(spec.phi[0], spec.L[0], spec.n[0])
    profile = bl_profile(params, rho_max=spec.rho_max)
    if "profile-tables" in spec.formats:
        order = np.argsort(profile.rho)
        lines = ["rho re_g im_g abs_g abs_g1"]
        for i in order:
            lines.append(f"{profile.rho[i]!r} {profile.g[i].real!r} "
                         f"{profile.g[i].imag!r} {abs(profile.g[i])!r} "
                         f"{abs(profile.g1[i])!r}")
        _atomic_write(os.path.join(outdir, "profile.txt"), "\n".join(lines) + "\n")
    payload = {
        "beta": profile.beta,
        "lam": profile.lam,
        "c0_abs": abs(profile.c0),
        "g_wall_abs": abs(profile.g[-1]),
        "residual": profile.residual,
        "decay_bound": {str(k): v for k, v in profile.decay_bound.items()},
        "rho_max": profile.rho_max,
        "rho_cut": profile.rho_cut,
    }
    if "json" in spec.formats:
        _write_json(os.path.join(outdir, "summary_profile.json"), payload)
    return {"residual": profile.residual < 1e-9}, payload


_BODIES = {
    "solve-linear": _cmd_solve_linear,
    "solve-nonlinear": _cmd_solve_nonlinear,
    "decompose": _cmd_decompose,
    "sweep": _cmd_sweep,
    "verify-lemmas": _cmd_verify_lemmas,
    "probe-uniqueness": _cmd_probe,
    "bl-profile": _cmd_bl_profile,
}


SCHEMA_VERSION = 1


def run(spec: RunSpec) -> int:
    """Execute a spec; returns the process exit code.

    Parameter problems (ValueError) propagate before anything is written.
    Numerical failures are captured in the summary and mapped to exit code 2;
    the summary file is produced either way.
    """
    outdir = spec.out
    os.makedirs(outdir, exist_ok=True)
    error = None
    try:
        gates, metrics = _BODIES[spec.command](spec, outdir)
    except (DecompositionError, SingularOperatorError, AiryRangeError,
            FloatingPointError) as exc:
        gates = {"completed": False}
        metrics = {}
        error = f"{type(exc).__name__}: {exc}"
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": spec.command,
        "spec": json.loads(serialize(spec)),
        "gates": gates,
        "metrics": metrics,
        "error": error,
    }
    _write_json(os.path.join(outdir, "summary.json"), summary)
    return 0 if all(gates.values()) else 2


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a JSON config file")
    p.add_argument("--phi", help="comma-separated flux values")
    p.add_argument("--L", help="comma-separated period multipliers")
    p.add_argument("--n", help="comma-separated mode indices")
    p.add_argument("--solver", choices=("clamped", "slip", "decomposition", "high_freq"))
    p.add_argument("--parity", choices=("even", "odd"))
    p.add_argument("--bc", choices=("clamped", "slip"))
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--n-x", type=int, dest="n_x")
    p.add_argument("--grid-order", type=int, dest="grid_order")
    p.add_argument("--rho-max", type=float, dest="rho_max")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--deltas", help="comma-separated delta values")
    p.add_argument("--c-tilde", type=float, dest="c_tilde")
    p.add_argument("--eps1", type=float)
    p.add_argument("--formats", help="comma-separated output formats "
                                     "(csv, json, profile-tables)")
    p.add_argument("--out", help="output directory")


def _spec_from_args(args: argparse.Namespace) -> RunSpec:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        base = parse_config(text)
        if base.command != args.command:
            raise ValueError(
                f"config command {base.command!r} does not match "
                f"invoked command {args.command!r}")
    else:
        base = RunSpec(command=args.command)
    for name in ("solver", "parity", "bc", "trials", "seed", "tol", "max_iter",
                 "n_x", "grid_order", "rho_max", "amplitude", "c_tilde",
                 "eps1", "out"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(base, name, value)
    def numbers(text: str, cast, name: str) -> list:
        items = [v.strip() for v in text.split(",") if v.strip()]
        try:
            return [cast(v) for v in items]
        except ValueError as exc:
            raise ValueError(f"flag --{name}: {exc}") from exc

    if args.phi is not None:
        base.phi = numbers(args.phi, float, "phi")
    if args.L is not None:
        base.L = numbers(args.L, float, "L")
    if args.n is not None:
        base.n = numbers(args.n, int, "n")
    if args.deltas is not None:
        base.deltas = numbers(args.deltas, float, "deltas")
    if args.formats is not None:
        base.formats = [v.strip() for v in args.formats.split(",") if v.strip()]
    # flags bypass __post_init__, so rebuild to re-validate the merged spec
    return RunSpec(**asdict(base))


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="poislab",
        description="spectral channel-mode laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common_flags(sub.add_parser(name))
    args = parser.parse_args(argv)
    try:
        spec = _spec_from_args(args)
        return run(spec)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
