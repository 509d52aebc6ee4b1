"""Batch front door: solve / sweep / report commands over INI-style configs.

Exit codes: 0 success, 2 infeasible mass constraint, 3 solver or
fixed-point failure, 4 I/O problems. Outputs are deterministic for identical
config and seed (CSV/JSON byte-identical; SVG carries no timestamps).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend import backend_name
from .contours import contour_figure
from .diagnostics import RunParams, SweepResult, fit_scalings
from .domain import DomainKind, MeridionalDomain, TruncationBox
from .errors import InfeasibleMassError, RinglabError, SolverFailure
from .flow import BackgroundFlow, BackgroundMode
from .rearrange import solve_fixed_point
from .solver import velocity_from_stream

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3
EXIT_IO = 4

CONFIG_DEFAULTS = {
    "domain": {"kind": "halfplane", "d": "1.0", "b": "1.0", "c": "1.0"},
    "grid": {"n_r": "128", "n_z": "256", "r_max": "", "z_max": ""},
    "flow": {"mode": "scaled_uniform", "w": "0.00633257397764611",
             "lambda": "100.0", "lambdas": ""},
    "solver": {"tol_energy": "1e-9", "tol_support": "1e-6", "max_iters": "200",
               "linear_tol": "1e-9", "symmetrize": "true", "init": "annulus",
               "seed": "0", "support_r_scale": "", "support_z_scale": ""},
    "output": {"directory": "out", "emit_fields": "true",
               "emit_contours": "true", "threads": "1"},
}


@dataclass
class RunConfig:
    params: RunParams
    lambdas: list
    outdir: Path
    emit_fields: bool
    emit_contours: bool
    threads: int


def load_config(path: str) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.read_dict(CONFIG_DEFAULTS)
    read = cp.read(path)
    if not read:
        raise OSError(f"config file not found: {path}")

    kind = DomainKind(cp.get("domain", "kind").strip().lower())
    domain = MeridionalDomain(kind, d=cp.getfloat("domain", "d"),
                              b=cp.getfloat("domain", "b"),
                              c=cp.getfloat("domain", "c"))
    box = None
    if cp.get("grid", "r_max") and cp.get("grid", "z_max"):
        box = TruncationBox(cp.getfloat("grid", "r_max"),
                            cp.getfloat("grid", "z_max"))
    support = None
    if cp.get("solver", "support_r_scale"):
        support = (cp.getfloat("solver", "support_r_scale"),
                   cp.getfloat("solver", "support_z_scale"))
    params = RunParams(
        domain=domain, lam=cp.getfloat("flow", "lambda"),
        W=cp.getfloat("flow", "w"),
        mode=BackgroundMode(cp.get("flow", "mode").strip().lower()),
        box=box, n_r=cp.getint("grid", "n_r"), n_z=cp.getint("grid", "n_z"),
        tol_energy=cp.getfloat("solver", "tol_energy"),
        tol_support=cp.getfloat("solver", "tol_support"),
        max_iters=cp.getint("solver", "max_iters"),
        linear_tol=cp.getfloat("solver", "linear_tol"),
        symmetrize=cp.getboolean("solver", "symmetrize"),
        init=cp.get("solver", "init").strip(),
        seed=cp.getint("solver", "seed"),
        support_scale=support)
    lambdas = [float(s) for s in cp.get("flow", "lambdas").replace(",", " ").split()]
    outdir = Path(os.environ.get("RINGLAB_OUTDIR", cp.get("output", "directory")))
    threads = int(os.environ.get("RINGLAB_THREADS", cp.get("output", "threads")))
    return RunConfig(params=params, lambdas=lambdas, outdir=outdir,
                     emit_fields=cp.getboolean("output", "emit_fields"),
                     emit_contours=cp.getboolean("output", "emit_contours"),
                     threads=threads)


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _params_info(p: RunParams) -> dict:
    p = p.normalized()
    return {"domain": p.domain.kind.value, "d": p.domain.d, "b": p.domain.b,
            "c": p.domain.c, "lambda": p.lam, "W": p.W, "mode": p.mode.value,
            "r_max": p.box.r_max, "z_max": p.box.z_max, "n_r": p.n_r,
            "n_z": p.n_z, "seed": p.seed, "init": p.init,
            "symmetrize": p.symmetrize, "backend": backend_name()}


def _write_fields_csv(path: Path, grid, state, background, lam) -> None:
    psi_total = np.where(grid.mask, state.psi_induced
                         - background.potential(grid, lam), 0.0)
    zeta = state.zeta.field()
    v_r, v_z = velocity_from_stream(psi_total, grid)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "r", "z", "psi_induced", "psi_total", "zeta",
                    "v_r", "v_z"])
        for i in range(grid.n_r):
            for j in range(grid.n_z):
                w.writerow([i, j, repr(float(grid.r[i])), repr(float(grid.z[j])),
                            repr(float(state.psi_induced[i, j])),
                            repr(float(psi_total[i, j])), repr(float(zeta[i, j])),
                            repr(float(v_r[i, j])), repr(float(v_z[i, j]))])


def _run_single(cfg: RunConfig, params: RunParams, tag: str = "") -> dict:
    state, record = solve_fixed_point(params)
    grid = params.normalized().make_grid()
    background = BackgroundFlow(params.normalized().mode, params.W)
    suffix = f"_{tag}" if tag else ""
    if cfg.emit_fields:
        _write_fields_csv(cfg.outdir / f"fields{suffix}.csv", grid, state,
                          background, params.lam)
        with open(cfg.outdir / f"convergence{suffix}.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration", "energy"])
            for it, e in enumerate(state.energy_history):
                w.writerow([it, repr(float(e))])
        # linear-solver residual trace for the converged vorticity
        from .solver import dump_residual_history, solve_K

        _, hist = solve_K(state.zeta.field(), grid, tol=params.linear_tol,
                          x0=state.psi_induced)
        dump_residual_history(hist, cfg.outdir / f"linear_residuals{suffix}.csv")
    if cfg.emit_contours:
        psi_lambda = np.where(grid.mask, state.psi_induced
                              - background.potential(grid, params.lam)
                              - state.mu, 0.0)
        label = (f"{params.domain.kind.value} lambda={params.lam:g} "
                 f"W={params.W:g}")
        svg = contour_figure(grid, psi_lambda, state.zeta.weights,
                             record.r_star, label)
        (cfg.outdir / f"contours{suffix}.svg").write_text(svg)
    return record.to_dict()


def cmd_solve(cfg: RunConfig) -> int:
    cfg.outdir.mkdir(exist_ok=True)
    rec = _run_single(cfg, cfg.params)
    summary = {"params": _params_info(cfg.params), "record": rec}
    _json_dump(summary, cfg.outdir / "run_summary.json")
    if not rec["converged"]:
        _json_dump({"error": "SolverFailure",
                    "message": "fixed point did not converge",
                    "last_support_diffs": rec["last_support_diffs"],
                    "exit_code": EXIT_SOLVER}, cfg.outdir / "error.json")
        return EXIT_SOLVER
    return EXIT_OK


SWEEP_COLUMNS = ["lam", "status", "E_lambda", "J_core", "mu", "impulse",
                 "circulation_kappa", "diameter", "centroid_r", "centroid_z",
                 "dist_to_rstar", "far_field_vz", "green_bifurcation_L1",
                 "weak_residual", "iterations", "converged",
                 "background_pairing", "identity_residual",
                 "resolution_cells", "r_star", "message"]


def _sweep_worker(args):
    cfg, lam = args
    from dataclasses import replace

    params = replace(cfg.params, lam=lam)
    try:
        rec = _run_single(cfg, params, tag=f"lam{lam:g}")
        rec["status"] = "ok" if rec["converged"] else "not_converged"
        rec["message"] = ""
    except InfeasibleMassError as exc:
        rec = {"lam": lam, "status": "infeasible", "message": str(exc)}
    except SolverFailure as exc:
        rec = {"lam": lam, "status": "solver_failure", "message": str(exc)}
    return lam, rec


def cmd_sweep(cfg: RunConfig) -> int:
    if len(cfg.lambdas) < 4:
        print("error: sweep needs at least 4 lambda values", file=sys.stderr)
        return EXIT_INFEASIBLE
    cfg.outdir.mkdir(exist_ok=True)
    jobs = [(cfg, lam) for lam in sorted(cfg.lambdas)]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    results.sort(key=lambda t: t[0])

    with open(cfg.outdir / "sweep.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["domain", "W", "mode"] + SWEEP_COLUMNS)
        p = cfg.params.normalized()
        for lam, rec in results:
            row = [p.domain.kind.value, repr(p.W), p.mode.value]
            for col in SWEEP_COLUMNS:
                val = rec.get(col, "")
                row.append(repr(val) if isinstance(val, float) else val)
            w.writerow(row)

    good = [(lam, rec) for lam, rec in results if rec.get("status") == "ok"]
    report = {"params": _params_info(cfg.params),
              "n_ok": len(good), "n_total": len(results)}
    try:
        from .diagnostics import DiagnosticsRecord

        records = [(lam, DiagnosticsRecord(**{k: v for k, v in rec.items()
                                              if k not in ("status", "message")}))
                   for lam, rec in good]
        p = cfg.params.normalized()
        report["fits"] = fit_scalings(SweepResult(records), p.domain, p.W,
                                      p.mode)
    except ValueError as exc:
        report["fits"] = {"error": str(exc)}
    _json_dump(report, cfg.outdir / "fit_report.json")
    return EXIT_OK if good else EXIT_SOLVER


def _read_sweep_csv(path: Path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def cmd_report(directory: str) -> int:
    d = Path(directory)
    sweep_path = d / "sweep.csv"
    fit_path = d / "fit_report.json"
    missing = [str(p) for p in (sweep_path, fit_path) if not p.exists()]
    if missing:
        print(f"error: missing inputs: {', '.join(missing)}", file=sys.stderr)
        return EXIT_IO
    rows = _read_sweep_csv(sweep_path)
    domains = {row["domain"] for row in rows}
    if len(domains) > 1:
        print(f"error: refusing to aggregate across domains: {sorted(domains)}",
              file=sys.stderr)
        return EXIT_IO
    fit = json.loads(fit_path.read_text())

    lines = ["# Vortex ring sweep report", ""]
    p = fit.get("params", {})
    lines.append(f"Domain `{p.get('domain')}`, mode `{p.get('mode')}`, "
                 f"W = {p.get('W')}, grid {p.get('n_r')}x{p.get('n_z')}, "
                 f"backend {p.get('backend')}.")
    lines.append("")
    lines.append("## Scaling fits")
    lines.append("")
    lines.append("| law | measured slope | 95% CI | predicted | tolerance | pass |")
    lines.append("|---|---|---|---|---|---|")
    fits = fit.get("fits", {})
    inner = fits.get("fits", {}) if isinstance(fits, dict) else {}
    for name, f in inner.items():
        if not isinstance(f, dict):
            continue
        tgt = f.get("target")
        tgt_s = f"{tgt:.6g}" if isinstance(tgt, float) else str(tgt)
        if "slope" in f:
            lines.append(f"| {name} | {f['slope']:.6g} | "
                         f"±{f.get('ci95', float('nan')):.2g} | {tgt_s} | "
                         f"{f.get('tol')} | {f.get('passed')} |")
        else:
            lines.append(f"| {name} | {f.get('values')} | | {tgt_s} | | "
                         f"{f.get('passed')} |")
    lines.append("")
    lines.append("## Per-point diagnostics")
    lines.append("")
    cols = ["lam", "status", "mu", "E_lambda", "diameter", "centroid_r",
            "dist_to_rstar", "identity_residual", "iterations"]
    lines.append("| " + " | ".join(cols) + " |")
    lines.append("|" + "---|" * len(cols))
    for row in rows:
        lines.append("| " + " | ".join(row.get(c, "") for c in cols) + " |")
    svgs = sorted(q.name for q in d.glob("contours*.svg"))
    if svgs:
        lines.append("")
        lines.append("## Core cross-sections")
        lines.append("")
        for s in svgs:
            lines.append(f"![{s}]({s})")
    lines.append("")
    (d / "report.md").write_text("\n".join(lines))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ringlab",
        description="Steady vortex rings by rearrangement energy maximization. "
                    "Config is an INI file with sections [domain] (kind: pipe|"
                    "halfplane|exteriorball|disk|rectangle; d, b, c), [grid] "
                    "(n_r, n_z, optional r_max/z_max), [flow] (mode, w, lambda, "
                    "lambdas), [solver] (tol_energy 1e-9, tol_support 1e-6, "
                    "max_iters 200, linear_tol 1e-9, symmetrize, init annulus|"
                    "random, seed, support_r_scale/support_z_scale), [output] "
                    "(directory, emit_fields, emit_contours, threads). "
                    "Environment overrides: RINGLAB_OUTDIR, RINGLAB_THREADS, "
                    "RINGLAB_BACKEND.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep"):
        sp = sub.add_parser(name, help=f"{name} from a config file")
        sp.add_argument("--config", required=True)
    rp = sub.add_parser("report", help="render a markdown report from sweep outputs")
    rp.add_argument("--dir", required=True)
    args = parser.parse_args(argv)

    try:
        if args.command == "report":
            return cmd_report(args.dir)
        cfg = load_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg)
        return cmd_sweep(cfg)
    except InfeasibleMassError as exc:
        _emit_error(args, "InfeasibleMassError", str(exc), EXIT_INFEASIBLE)
        return EXIT_INFEASIBLE
    except SolverFailure as exc:
        _emit_error(args, "SolverFailure", str(exc), EXIT_SOLVER)
        return EXIT_SOLVER
    except (OSError, RinglabError, ValueError) as exc:
        _emit_error(args, type(exc).__name__, str(exc), EXIT_IO)
        return EXIT_IO


def _emit_error(args, kind: str, message: str, code: int) -> None:
    payload = {"error": kind, "message": message, "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    try:
        cfg = load_config(args.config) if hasattr(args, "config") else None
        if cfg and cfg.outdir.is_dir():
            _json_dump(payload, cfg.outdir / "error.json")
    except Exception:
        pass


if __name__ == "__main__":
    sys.exit(main())
