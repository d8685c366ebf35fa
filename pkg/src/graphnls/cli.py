"""Command-line front end: ``graphnls <subcommand> ...``.

Every subcommand prints one JSON document on stdout.  Floats are written with
17 significant digits and keys keep a fixed order, so identical inputs give
byte-identical output.  Exit codes: 0 success, 1 input error, 2 a solve that
ended without convergence or classification.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .graph import GraphError, load_graph, validate
from .mesh import build_mesh, read_csv, write_csv
from .operators import assemble, energy, multiplier
from .soliton import (CRITICAL_MASS_LINE, K62_LINE, gamma_mu, line_infimum_attained,
                      soliton, t_mu)
from .solver import SEED_KINDS, SolverConfig, mass_sweep, solve_ground_state
from .spectral import check_assumption_E0, ground_eigenpair


class InputError(Exception):
    """Bad command line or unreadable input; exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


# ------------------------------------------------------------------ JSON out


def _scalar(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"UNBOUNDED"' if x > 0 else '"-UNBOUNDED"'
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: fixed float format, ``inf`` written as ``"UNBOUNDED"``."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, Path):
        obj = str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _scalar(obj)


def config_hash(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func")}
    return hashlib.sha256(dumps(cfg, indent=0).encode()).hexdigest()


# ------------------------------------------------------------------- parsing


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def _positive(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return x


def _mu(text: str) -> float:
    x = _positive(text)
    if x > 2:
        raise argparse.ArgumentTypeError(f"mu must lie in (0, 2], got {text}")
    return x


def _exponent(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return _positive(text)


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _seed_list(text: str) -> list[str]:
    kinds = [t.strip() for t in text.split(",") if t.strip()]
    bad = [k for k in kinds if k not in SEED_KINDS]
    if bad or not kinds:
        raise argparse.ArgumentTypeError(f"seed kinds must come from {','.join(SEED_KINDS)}")
    return kinds


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="graphnls", description="Ground states of the focusing NLS on metric graphs.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def mesh_args(sp, h=0.01, L=40.0):
        sp.add_argument("--h", type=_positive, default=h, help="mesh size (default %(default)s)")
        sp.add_argument("--L", type=_positive, default=L, help="truncation of external edges (default %(default)s)")

    def out_arg(sp):
        sp.add_argument("--out", type=Path, help="directory for JSON and CSV files")

    def solver_args(sp):
        mesh_args(sp)
        sp.add_argument("--mu", type=_mu, required=True, help="nonlinearity power in (0, 2]")
        sp.add_argument("--dt", type=_positive, default=1.0)
        sp.add_argument("--max-iter", type=int, default=4000)
        sp.add_argument("--tol-residual", type=_positive, default=1e-8)
        sp.add_argument("--tol-energy", type=_positive, default=1e-12)
        sp.add_argument("--blowup-cap", type=float, default=-1e6)
        sp.add_argument("--seeds", type=_seed_list, default=list(SEED_KINDS))
        sp.add_argument("--workers", type=int, default=None,
                        help="threads per solve (default: GRAPHNLS_THREADS or 1)")
        sp.add_argument("--no-certificate", action="store_true", help="skip the energy floor check")
        out_arg(sp)

    sp = sub.add_parser("validate", help="check a graph file")
    sp.add_argument("--graph", type=_existing, required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("spectrum", help="bottom of the linear spectrum and E0")
    sp.add_argument("--graph", type=_existing, required=True)
    mesh_args(sp)
    out_arg(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("solve", help="ground state at one mass")
    sp.add_argument("--graph", type=_existing, required=True)
    sp.add_argument("--mass", type=_positive, required=True)
    solver_args(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="ground states along ascending masses")
    sp.add_argument("--graph", type=_existing, required=True)
    sp.add_argument("--masses", type=_float_list, required=True, help="comma-separated, ascending")
    solver_args(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("soliton", help="line soliton and threshold values")
    sp.add_argument("--mu", type=_mu, required=True)
    sp.add_argument("--mass", type=_positive, required=True)
    sp.set_defaults(func=cmd_soliton)

    sp = sub.add_parser("diagnose", help="concentration curve, energy and witness for a saved profile")
    sp.add_argument("--graph", type=_existing, required=True)
    sp.add_argument("--profile", type=_existing, help="profile CSV written by solve")
    sp.add_argument("--mu", type=_mu, required=True)
    sp.add_argument("--mass", type=_positive, help="mass for the witness (default: profile mass)")
    sp.add_argument("--t-grid", type=_float_list, default=[0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    sp.add_argument("--witness-offsets", type=_float_list, help="offsets along an external edge")
    mesh_args(sp)
    out_arg(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("gn-estimate", help="sampled lower bound for a Gagliardo-Nirenberg constant")
    sp.add_argument("--graph", type=_existing, required=True)
    sp.add_argument("--p", type=_exponent, required=True, help="number or 'inf'")
    sp.add_argument("--q", type=_exponent, default=2.0)
    sp.add_argument("--trials", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    mesh_args(sp, h=0.05)
    sp.set_defaults(func=cmd_gn)
    return p


# ------------------------------------------------------------------ commands


def _emit(doc: dict, args, name: str = "report.json") -> None:
    text = dumps(doc) + "\n"
    sys.stdout.write(text)
    if getattr(args, "out", None) is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / name).write_text(text)


def _solver_config(args) -> SolverConfig:
    cfg = SolverConfig(h=args.h, L=args.L, dt=args.dt, max_iter=args.max_iter,
                       tol_residual=args.tol_residual, tol_energy=args.tol_energy,
                       blowup_cap=args.blowup_cap, seeds=tuple(args.seeds),
                       certificate=not args.no_certificate, workers=args.workers)
    cfg.check()
    return cfg


def cmd_validate(args) -> int:
    g = load_graph(args.graph)
    issues = validate(g)
    _emit({"valid": not issues, "issues": issues, "vertices": len(g.vertices), "edges": len(g.edges),
           "external_edges": len(g.external_edges)}, args)
    return 0 if not issues else 1


def _checked_graph(path):
    g = load_graph(path)
    issues = validate(g)
    if issues:
        raise GraphError("invalid graph: " + "; ".join(issues))
    return g


def cmd_spectrum(args) -> int:
    g = _checked_graph(args.graph)
    forms = assemble(build_mesh(g, args.h, args.L))
    pair = ground_eigenpair(forms)
    doc = {"config_hash": config_hash(args), "lambda0": pair.value, "E0": pair.E0,
           "assumption_E0_positive": check_assumption_E0(pair), "residual": pair.residual,
           "n_nodes": forms.mesh.n_nodes}
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_csv(pair.vector, args.out / "eigenfunction.csv")
    _emit(doc, args, "spectrum.json")
    return 0


def _report_doc(rep, args) -> dict:
    d = rep.to_dict()
    return {"config_hash": config_hash(args), **d}


def cmd_solve(args) -> int:
    g = _checked_graph(args.graph)
    rep = solve_ground_state(g, args.mass, args.mu, _solver_config(args))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_csv(rep.profile, args.out / "profile.csv")
        diag.write_rho_csv(rep.diagnostics.rho_t, rep.diagnostics.rho, args.out / "rho.csv")
    _emit(_report_doc(rep, args), args)
    return 2 if rep.status == "MAXITER" else 0


def cmd_sweep(args) -> int:
    g = _checked_graph(args.graph)
    reps = mass_sweep(g, args.mu, args.masses, _solver_config(args))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        for k, rep in enumerate(reps):
            if rep.profile is not None:
                write_csv(rep.profile, args.out / f"profile_{k:03d}.csv")
    _emit({"config_hash": config_hash(args), "reports": [r.to_dict() for r in reps]}, args, "sweep.json")
    return 2 if any(r.status in ("MAXITER", "ERROR") for r in reps) else 0


def cmd_soliton(args) -> int:
    mu, m = args.mu, args.mass
    doc = {"config_hash": config_hash(args), "mu": mu, "mass": m}
    if mu == 2:
        doc.update({"gamma_mu": None, "t_mu": t_mu(m, mu), "critical_mass": CRITICAL_MASS_LINE,
                    "K62_line": K62_LINE, "infimum_attained": line_infimum_attained(m, mu)})
    else:
        sol = soliton(m, mu)
        doc.update({"gamma_mu": gamma_mu(mu), "t_mu": t_mu(m, mu), "omega": sol.omega,
                    "amplitude": sol.amplitude, "infimum_attained": True})
    _emit(doc, args)
    return 0


def cmd_diagnose(args) -> int:
    g = _checked_graph(args.graph)
    doc = {"config_hash": config_hash(args)}
    if args.profile is not None:
        mesh = build_mesh(g, args.h, args.L)
        f = read_csv(mesh, args.profile)
        forms = assemble(mesh)
        ts = sorted(args.t_grid)
        rho = diag.rho_curve(f, ts)
        doc.update({"mass": f.mass, "energy": energy(f, forms, args.mu),
                    "omega": multiplier(f, forms, args.mu),
                    "rho_curve": {"t": ts, "rho": rho.tolist()}})
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            diag.write_rho_csv(ts, rho, args.out / "rho.csv")
    if args.witness_offsets is not None:
        if args.mu == 2:
            raise InputError("the witness needs mu < 2")
        m = args.mass if args.mass is not None else doc.get("mass")
        if m is None:
            raise InputError("--witness-offsets needs --mass or --profile")
        energies = diag.runaway_witness(g, args.mu, m, sorted(args.witness_offsets), h=args.h)
        doc["witness"] = {"offsets": sorted(args.witness_offsets), "energies": energies,
                          "line_level": -t_mu(m, args.mu)}
    if len(doc) == 1:
        raise InputError("nothing to diagnose: give --profile and/or --witness-offsets")
    _emit(doc, args, "diagnose.json")
    return 0


def cmd_gn(args) -> int:
    g = _checked_graph(args.graph)
    est = diag.gn_estimate(g, args.p, args.q, trials=args.trials, seed=args.seed, h=args.h, L=args.L)
    _emit({"config_hash": config_hash(args), "p": args.p, "q": args.q, "estimate": est.value,
           "best_trial": est.labels[int(np.argmax(est.ratios))], "n_trials": len(est.ratios)}, args)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return int(args.func(args))
    except (InputError, GraphError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        sys.stderr.write(f"graphnls: error: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
