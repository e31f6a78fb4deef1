"""Command-line front end.

Subcommands reproduce the data behind every figure-level result as CSV,
print a JSON summary to stdout, and leave a manifest next to each output
so a run can be reproduced byte-for-byte.  Output locations resolve as
--out, then $CALX_OUT_DIR, then the working directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import curves as _curves
from . import equilibria as _eq
from . import simulate as _integ
from . import slowfast as _sf
from . import tables, verify
from .model import ModelParams, StressKind, StressLaw, params_from_json, params_to_json

_HILL = {1: StressKind.HILL1, 2: StressKind.HILL2}


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--params", metavar="FILE",
                        help="JSON parameter file overriding the defaults")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--seedless", action="store_true",
                        help="reserved; no subcommand uses randomness")


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get("CALX_OUT_DIR") or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _resolve_params(args) -> ModelParams:
    """Defaults <- --params file <- individual flags."""
    p = ModelParams()
    if args.params:
        p = params_from_json(Path(args.params).read_text())
    kw = {}
    for flag, attr in (("mu", "mu"), ("lam", "lam"), ("K", "K"), ("K1", "K1"),
                       ("K2", "K2"), ("Gamma", "Gamma"), ("b", "b")):
        v = getattr(args, flag, None)
        if v is not None:
            kw[attr] = v
    hill = getattr(args, "hill", None)
    alpha = getattr(args, "alpha", None)
    if hill is not None:
        kw["stress"] = StressLaw(_HILL[hill], alpha if alpha is not None else 10.0)
    elif alpha is not None:
        kw["stress"] = StressLaw(StressKind.HILL1, alpha)
    return p.with_(**kw) if kw else p


def _param_flags(parser: argparse.ArgumentParser, lam_flag: bool = True):
    parser.add_argument("--mu", type=float, default=None)
    if lam_flag:
        parser.add_argument("--lambda", dest="lam", type=float, default=None)
    parser.add_argument("--alpha", type=float, default=None,
                        help="stress gain (implies a Hill law)")
    parser.add_argument("--hill", type=int, choices=(1, 2), default=None,
                        help="Hill order of the stress law")
    parser.add_argument("--K", type=float, default=None)
    parser.add_argument("--K1", type=float, default=None)
    parser.add_argument("--K2", type=float, default=None)
    parser.add_argument("--Gamma", type=float, default=None)
    parser.add_argument("--b", type=float, default=None)


def _write_manifest(out_dir: Path, stem: str, subcommand: str, p, outputs: list,
                    t0: float, extra: dict | None = None):
    resolved = params_to_json(p) if isinstance(p, ModelParams) else json.dumps(p)
    manifest = {
        "subcommand": subcommand,
        "version": __version__,
        "resolved_params": json.loads(resolved),
        "config_hash": hashlib.sha256(resolved.encode()).hexdigest(),
        "outputs": [str(o) for o in outputs],
        "wall_time_s": round(time.perf_counter() - t0, 6),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / f"{stem}.manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _emit(obj):
    print(json.dumps(obj, indent=2, default=float))


def _parse_init(text: str, dim: int) -> tuple:
    vals = tuple(float(v) for v in text.split(","))
    if len(vals) != dim:
        raise SystemExit(f"error: --init needs {dim} comma-separated values")
    return vals


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    out_dir = _out_dir(args)
    model = args.model
    if model == "vdp":
        p = args.epsilon
        init = _parse_init(args.init, 2) if args.init else (2.0, 0.0)
    else:
        p = _resolve_params(args)
        dim = 2 if model == "atri" else 3
        init = (_parse_init(args.init, dim) if args.init
                else ((0.4, 0.5) if model == "atri" else (0.4, 0.0, 0.5)))
    cfg = _integ.IntegratorConfig(t_end=args.t_end)
    try:
        summary = _integ.measure_cycle(model, p, init, cfg)
        traj = _integ.integrate(model, p, init,
                                cfg if summary.t_end_used == cfg.t_end
                                else _integ.IntegratorConfig(t_end=summary.t_end_used))
    except (_integ.IntegrationError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv_path = out_dir / f"simulate_{model}.csv"
    csv_path.write_text(tables.trajectory_csv(traj))
    man = _write_manifest(out_dir, f"simulate_{model}", "simulate",
                          p if model != "vdp" else {"model": "vdp", "epsilon": p},
                          [csv_path], t0, {"model": model, "init": list(init)})
    _emit({k: v for k, v in asdict(summary).items() if k != "final_state"})
    print(f"wrote {csv_path} and {man}", file=sys.stderr)
    return 0


def cmd_curves(args) -> int:
    t0 = time.perf_counter()
    out_dir = _out_dir(args)
    p = _resolve_params(args)
    if p.stress.kind is StressKind.NONE:
        p = p.with_(stress=StressLaw(StressKind.HILL1, args.alpha or 10.0))
    if args.grid:
        lo, hi, n = args.grid.split(":")
        grid = np.geomspace(float(lo), float(hi), int(n))
    else:
        grid = None

    kind = args.kind
    if kind == "hopf":
        curve = _curves.hopf_curve(p, grid)
        summary = _curves.curve_summary(p.stress.kind, p.stress.alpha)
        summary["lambda_zero_mus"] = _curves.hopf_lambda_zero_mus(p.stress)
    elif kind == "fold":
        curve = _curves.fold_curve(p, grid)
        lam_m, mu_m, c_m = _curves.fold_merge_lambda(p)
        summary = {"merge_lambda": lam_m, "merge_mu": mu_m, "merge_c": c_m,
                   "lambda_zero_mus": _curves.fold_lambda_zero_mus(p)}
    else:
        curve = _curves.discr_curve(p, grid)
        summary = {"lambda_zero_mus": _curves.discr_lambda_zero_mus(p)}
    summary["n_samples"] = len(curve.c)
    summary["n_discarded"] = curve.n_discarded
    summary["n_flagged"] = curve.n_flagged

    csv_path = out_dir / f"curve_{kind}.csv"
    csv_path.write_text(tables.curve_csv(curve))
    _write_manifest(out_dir, f"curve_{kind}", "curves", p, [csv_path], t0,
                    {"kind": kind})
    _emit(summary)
    return 0


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    out_dir = _out_dir(args)
    p = _resolve_params(args)
    lo, hi = (float(v) for v in args.range.split(":"))
    grid = np.linspace(lo, hi, args.steps)
    init = _parse_init(args.init, 2 if args.model == "atri" else 3) if args.init else None
    try:
        points = _integ.sweep(args.model, p, args.param, grid,
                              _integ.IntegratorConfig(t_end=args.t_end),
                              continuation=args.hysteresis, init=init)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv_path = out_dir / f"sweep_{args.model}_{args.param}.csv"
    csv_path.write_text(tables.sweep_csv(points, args.param))
    _write_manifest(out_dir, f"sweep_{args.model}_{args.param}", "sweep", p,
                    [csv_path], t0,
                    {"model": args.model, "param": args.param,
                     "range": [lo, hi], "steps": args.steps,
                     "hysteresis": args.hysteresis})
    osc = [pt.param_value for pt in points if pt.summary.oscillating]
    _emit({
        "n_points": len(points),
        "n_oscillating": len(osc),
        "first_oscillating": min(osc) if osc else None,
        "last_oscillating": max(osc) if osc else None,
    })
    return 0


def cmd_gspt(args) -> int:
    t0 = time.perf_counter()
    out_dir = _out_dir(args)
    p = _resolve_params(args)
    if args.model == "mech" and p.stress.kind is StressKind.NONE:
        p = p.with_(stress=StressLaw(StressKind.HILL1, args.alpha or 10.0))
    eps = args.epsilon

    if args.model == "mech":
        margin = float(_sf.turning_margin(p, 1.0))
        if margin <= 0:
            _emit({"escape": True, "turning_margin_at_c1": margin, "K": p.K,
                   "note": "layer trajectories leave the break curve and never return"})
            _write_manifest(out_dir, "gspt_mech", "gspt", p, [], t0,
                            {"model": "mech", "escape": True})
            return 0
    try:
        comp = _sf.compose_relaxation_oscillation(args.model, p, eps=eps)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv_path = out_dir / f"gspt_{args.model}.csv"
    csv_path.write_text(tables.gspt_csv(comp))
    outputs = [csv_path]
    if args.model == "mech":
        bc = _sf.break_curve_3d(p, np.geomspace(0.02, 5.0, 400))
        bc_path = out_dir / "break_curve.csv"
        bc_path.write_text(tables.break_curve_csv(bc))
        outputs.append(bc_path)
    _write_manifest(out_dir, f"gspt_{args.model}", "gspt", p, outputs, t0,
                    {"model": args.model, "epsilon": comp.eps})
    _emit({
        "escape": False,
        "t_turning": comp.t_turning,
        "t_back": comp.t_back,
        "c_peak": comp.c_peak,
        "period_estimate": comp.period_estimate,
        "t_fast": comp.t_fast,
        "epsilon": comp.eps,
        "break_state": list(comp.break_state),
    })
    return 0


def cmd_equilibria(args) -> int:
    t0 = time.perf_counter()
    out_dir = _out_dir(args)
    p = _resolve_params(args)
    try:
        eqs = (_eq.equilibria_atri(p) if args.model == "atri"
               else _eq.equilibria_mech(p))
        outputs = []
        if args.nullclines:
            lo, hi, n = args.nullclines.split(":")
            grid = np.geomspace(float(lo), float(hi), int(n))
            nc_path = out_dir / "nullclines.csv"
            nc_path.write_text(tables.nullclines_csv(_eq.nullclines_atri(p, grid)))
            outputs.append(nc_path)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out_dir, f"equilibria_{args.model}", "equilibria", p, outputs,
                    t0, {"model": args.model})
    _emit([{
        "c": e.c, "h": e.h, "theta": e.theta, "class": e.klass.value,
        "trace": e.trace, "det": e.det, "discr": e.discr,
        "eigenvalues": [[z.real, z.imag] for z in e.eigenvalues],
        "residual": e.residual,
    } for e in eqs])
    return 0


def cmd_ladder(args) -> int:
    t0 = time.perf_counter()
    out_dir = _out_dir(args)
    p = _resolve_params(args)
    lo, hi = (float(v) for v in args.range.split(":"))
    try:
        ladder = _eq.ladder_atri(p, lo, hi, tol=args.tol)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv_path = out_dir / "ladder.csv"
    csv_path.write_text(tables.ladder_csv(ladder))
    _write_manifest(out_dir, "ladder", "ladder", p, [csv_path], t0,
                    {"range": [lo, hi], "tol": args.tol})
    _emit([{"mu": e.mu, "kind": e.kind.value, "branch_c": e.branch_c,
            "description": e.description} for e in ladder.events])
    return 0


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    p = _resolve_params(args)  # validates --params if provided
    results = verify.run_all(quick=args.quick)
    _write_manifest(_out_dir(args), "verify", "verify", p, [], t0,
                    {"quick": args.quick})
    width = max(len(r.name) for r in results)
    n_unexpected = 0
    for r in results:
        status = r.status
        if not r.ok:
            n_unexpected += 1
        print(f"[{status:5s}] criterion {r.criterion:>2}: {r.name:<{width}s}  "
              f"{r.detail}  ({r.elapsed:.1f}s)")
    n_xfail = sum(1 for r in results if r.status == "XFAIL")
    print(f"\n{len(results)} checks: "
          f"{sum(1 for r in results if r.status == 'PASS')} passed, "
          f"{n_unexpected} failed, {n_xfail} known-unattainable (see README)")
    if n_unexpected:
        return 1
    if args.strict and n_xfail:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="calx",
        description="Calcium-signalling ODE models: equilibria, bifurcation "
                    "curves, limit-cycle sweeps, and slow-fast analysis.")
    ap.add_argument("--version", action="version", version=f"calx {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate one trajectory and measure cycles")
    sim.add_argument("--model", choices=("atri", "mech", "vdp"), default="atri")
    _param_flags(sim)
    sim.add_argument("--epsilon", type=float, default=0.025,
                     help="Van der Pol timescale ratio")
    sim.add_argument("--init", help="comma-separated initial state")
    sim.add_argument("--t-end", type=float, default=400.0)
    _common(sim)
    sim.set_defaults(fn=cmd_simulate)

    cur = sub.add_parser("curves", help="two-parameter bifurcation curves")
    cur.add_argument("--kind", choices=("hopf", "fold", "discr"), required=True)
    _param_flags(cur, lam_flag=False)
    cur.add_argument("--grid", help="log grid as lo:hi:n (default 1e-4:50:2000)")
    _common(cur)
    cur.set_defaults(fn=cmd_curves)

    sw = sub.add_parser("sweep", help="one-parameter brute-force bifurcation sweep")
    sw.add_argument("--model", choices=("atri", "mech"), default="atri")
    sw.add_argument("--param", choices=("mu", "lambda"), default="mu")
    sw.add_argument("--range", required=True, metavar="LO:HI")
    sw.add_argument("--steps", type=int, default=41)
    sw.add_argument("--hysteresis", action="store_true",
                    help="carry the final state between grid points")
    _param_flags(sw)
    sw.add_argument("--init", help="comma-separated initial state")
    sw.add_argument("--t-end", type=float, default=400.0)
    _common(sw)
    sw.set_defaults(fn=cmd_sweep)

    gs = sub.add_parser("gspt", help="slow-fast composite relaxation oscillation")
    gs.add_argument("--model", choices=("atri", "mech"), default="atri")
    _param_flags(gs)
    gs.add_argument("--epsilon", type=float, default=None,
                    help="timescale ratio (default 1/K1)")
    _common(gs)
    gs.set_defaults(fn=cmd_gspt)

    eq = sub.add_parser("equilibria", help="steady states and stability")
    eq.add_argument("--model", choices=("atri", "mech"), default="atri")
    _param_flags(eq)
    eq.add_argument("--nullclines", metavar="LO:HI:N",
                    help="also write both nullclines on a log c-grid")
    _common(eq)
    eq.set_defaults(fn=cmd_equilibria)

    lad = sub.add_parser("ladder", help="one-parameter bifurcation ladder")
    lad.add_argument("--range", default="0:0.6", metavar="LO:HI")
    lad.add_argument("--tol", type=float, default=1e-5)
    _param_flags(lad)
    _common(lad)
    lad.set_defaults(fn=cmd_ladder)

    ver = sub.add_parser("verify", help="golden-number regression suite")
    ver.add_argument("--quick", action="store_true", help="fast subset (< 60 s)")
    ver.add_argument("--strict", action="store_true",
                     help="nonzero exit on known-unattainable checks too")
    _common(ver)
    ver.set_defaults(fn=cmd_verify)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
