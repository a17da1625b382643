"""Command line interface.

Exit codes: ``0`` all checks passed, ``1`` a check failed, ``2`` usage or
parse error.

CSV formats (all numbers with 17 significant digits):

* ``scan --mode positive-real``: ``re_s, im_s, herm_min_eig, norm_G``
* ``scan --mode vertical-line``: same columns, widest omega range only
* ``scan --mode contraction``: ``t, norm``
* ``scan --mode maxdiss``: ``re_lambda, im_lambda, sigma_min, cond, surjective``
* ``simulate``: ``trajectory.csv`` with ``t, H, supplied, dissipated,
  residual`` and ``states.csv`` with ``t, re_x0, im_x0, ...``
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from phnode import analysis, timeint
from phnode.core import PHStructure, to_node, validate_ph_structure
from phnode.discretize import HyperbolicModel, check_port_condition
from phnode.errors import ModelFileError, PHNodeError
from phnode.modelfile import (
    ModelFile,
    Scan,
    build_model_object,
    initial_state,
    input_signal,
    lambdas,
    load_model_file,
    to_jsonable,
)
from phnode.models import assemble

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SYM_TOL = 1e-10


class _UsageError(Exception):
    pass


def _load(path: str, n_cells: int | None):
    mf = load_model_file(path)
    obj = build_model_object(mf)
    n = n_cells or mf.discretization.n_cells
    if n < 4:
        raise _UsageError("--n-cells must be at least 4")
    return mf, obj, n


def _node(mf: ModelFile, obj, n_cells: int):
    if isinstance(obj, PHStructure):
        return to_node(obj)
    return assemble(obj, n_cells, scheme=mf.discretization.scheme)


def _emit(report: dict) -> None:
    print(json.dumps(to_jsonable(report), indent=2, sort_keys=True))


def cmd_validate(args) -> int:
    mf, obj, n = _load(args.path, args.n_cells)
    tol = SYM_TOL if args.tol is None else args.tol
    checks = []
    if isinstance(obj, PHStructure):
        rep = validate_ph_structure(obj)
        checks += [{"check": c, "measured": v, "threshold": t, "passed": False} for c, v, t in rep.violations]
        if rep.passed:
            try:
                bound = analysis.sym_part_bound(to_node(obj))
                checks.append({"check": "sym part bound", "measured": bound, "threshold": tol,
                               "passed": bound <= tol})
            except PHNodeError as exc:
                checks.append({"check": "H definite", "measured": str(exc), "threshold": None, "passed": False})
    else:
        if isinstance(obj, HyperbolicModel):
            rep = obj.validate()
            checks += [{"check": c, "measured": v, "threshold": t, "passed": False} for c, v, t in rep.violations]
            if rep.passed:
                _, res = check_port_condition(obj.WB_full, obj.WC_full)
                checks.append({"check": "port condition", "measured": res, "threshold": 1e-12, "passed": True})
        if all(c["passed"] for c in checks):
            node = _node(mf, obj, n)
            bound = analysis.sym_part_bound(node)
            checks.append({"check": "sym part bound", "measured": bound, "threshold": tol, "passed": bound <= tol})
    passed = all(c["passed"] for c in checks)
    violations = [c["check"] for c in checks if not c["passed"]]
    _emit({"passed": passed, "violations": violations, "checks": checks, "path": str(args.path)})
    return EXIT_OK if passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    mf, obj, n = _load(args.path, args.n_cells)
    sim = mf.simulation
    if sim is None:
        from phnode.modelfile import Simulation
        sim = Simulation()
    t_final = args.t_final or sim.t_final
    dt = args.dt or sim.dt
    tol = sim.tol if args.tol is None else args.tol
    node = _node(mf, obj, n)
    x0 = initial_state(sim.x0, node.n)
    sig = input_signal(sim.input, node.m)
    if sig.m != node.m:
        raise ModelFileError(f"input has dimension {sig.m}, model has {node.m}")
    traj = timeint.simulate(node, x0, sig, t_final, dt)
    audit = timeint.energy_audit(traj, node, tol_bal=tol)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    timeint.write_trajectory_csv(out / "trajectory.csv", traj)
    every = sim.snapshot_every or max(1, traj.steps // 100)
    timeint.write_states_csv(out / "states.csv", traj, every=every)
    summary = audit.as_dict() | {"steps": traj.steps, "tau": traj.tau, "n": node.n, "m": node.m,
                                 "provenance": node.provenance,
                                 "H0": float(traj.hamiltonian[0]), "HT": float(traj.hamiltonian[-1])}
    (out / "audit.json").write_text(json.dumps(to_jsonable(summary), indent=2, sort_keys=True) + "\n")
    state = "PASS" if audit.passed else "FAIL"
    print(f"energy audit: {state} max residual {audit.max_residual:.3e} "
          f"(relative {audit.max_relative_residual:.3e}, tol {tol:g}); "
          f"supplied {audit.cumulative_supplied:.6e} dissipated {audit.cumulative_dissipated:.6e}")
    return EXIT_OK if audit.passed else EXIT_FAIL


def _write_rows(target, header, rows):
    fh = open(target, "w", newline="") if target else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else "%.17g" % v for v in r])
    finally:
        if target:
            fh.close()


def _omega_grid(step: float, half_width: float) -> np.ndarray:
    k = int(np.floor(half_width / step + 1e-9))
    return step * np.arange(-k, k + 1)


def cmd_scan(args) -> int:
    mf, obj, n = _load(args.path, args.n_cells)
    sc = mf.scan or Scan()
    node = _node(mf, obj, n)
    prefix = "" if args.out else "# "
    mode = args.mode

    if mode == "positive-real":
        tol = sc.tol_pr if args.tol is None else args.tol
        rep = analysis.positive_real_scan(node, mf.s_grid(), tol_pr=tol)
        rows = [(s.real, s.imag, h, g) for s, h, g in zip(rep.s, rep.herm_min_eig, rep.norm_G)]
        _write_rows(args.out, ["re_s", "im_s", "herm_min_eig", "norm_G"], rows)
        print(prefix + rep.summary())
        return EXIT_OK if rep.passed else EXIT_FAIL

    if mode == "vertical-line":
        ranges = sorted(sc.omega_ranges)
        sups, rep = [], None
        for W in ranges:
            rep = analysis.vertical_line_scan(node, sc.sigma, _omega_grid(sc.omega_step, W))
            sups.append(rep.sup_norm)
        rows = [(s.real, s.imag, h, g) for s, h, g in zip(rep.s, rep.herm_min_eig, rep.norm_G)]
        _write_rows(args.out, ["re_s", "im_s", "herm_min_eig", "norm_G"], rows)
        parts = ", ".join(f"|omega|<={W:g}: {v:.6e}" for W, v in zip(ranges, sups))
        growth = sups[-1] / sups[0] if sups[0] > 0 else float("inf") if sups[-1] > 0 else 1.0
        trend = "growing" if growth >= 2.0 else "bounded"
        ok = all(np.isfinite(sups))
        print(prefix + f"vertical-line: {'PASS' if ok else 'FAIL'} sigma={sc.sigma:g} sup {parts}; "
              f"growth x{growth:.4g} ({trend})")
        return EXIT_OK if ok else EXIT_FAIL

    if mode == "contraction":
        tol = sc.tol_contraction if args.tol is None else args.tol
        rep = analysis.contraction_scan(node.A, node.metric, sc.times, tol=tol)
        _write_rows(args.out, ["t", "norm"], zip(rep.times, rep.norms))
        t, v = rep.worst
        print(prefix + f"contraction: {'PASS' if rep.passed else 'FAIL'} max norm {v:.12g} at t={t:g} (tol {tol:g})")
        return EXIT_OK if rep.passed else EXIT_FAIL

    if mode == "maxdiss":
        rep = analysis.check_maximal_dissipative(node.A, node.metric, lambdas(sc), tol=args.tol)
        rows = [(l.real, l.imag, s, c, str(f)) for l, s, c, f in
                zip(rep.lambdas, rep.resolvent_sigma_min, rep.resolvent_cond, rep.resolvent_surjective)]
        _write_rows(args.out, ["re_lambda", "im_lambda", "sigma_min", "cond", "surjective"], rows)
        ok = rep.consistent and rep.maximal_dissipative
        print(prefix + f"maxdiss: {'PASS' if ok else 'FAIL'} dissipative={rep.is_dissipative} "
              f"resolvent={all(rep.resolvent_surjective)} adjoint={rep.adjoint_dissipative} "
              f"agree={rep.consistent}")
        return EXIT_OK if ok else EXIT_FAIL

    raise _UsageError(f"unknown mode {mode!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phnode", description="Port-Hamiltonian node toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("path", help="JSON model file")
        sp.add_argument("--n-cells", type=int, default=None, help="override the discretization size")
        sp.add_argument("--tol", type=float, default=None, help="override the check tolerance")

    v = sub.add_parser("validate", help="structural checks")
    common(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="implicit midpoint run with energy audit")
    common(s)
    s.add_argument("--t-final", type=float, default=None)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--out", default=None, help="output directory (default: current)")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("scan", help="transfer function and semigroup scans")
    common(c)
    c.add_argument("--mode", required=True, choices=["positive-real", "vertical-line", "contraction", "maxdiss"])
    c.add_argument("--out", default=None, help="CSV file (default: standard output)")
    c.set_defaults(func=cmd_scan)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ModelFileError, _UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PHNodeError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
