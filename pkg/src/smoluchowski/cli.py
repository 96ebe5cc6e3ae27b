"""Command-line front end.

Verbs::

    smoluchowski run CONFIG [-o DIR]
    smoluchowski study CONFIG --n 10,100,1000 [-o DIR]
    smoluchowski compare RUN_DIR --oracle constant_exact|moment_ode:<class>|reference:<r>
    smoluchowski audit-kernel CONFIG

Exit status: 0 success, 1 a requested check failed, 2 configuration or
input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import diagnostics as D
from .config import RunSpec, load_config
from .convex import build_vallee_poussin
from .errors import BlowUpError, ConfigError, DataError, DomainError, NumericalError
from .kernels import SampleSpec, verify_hypotheses
from .oracle import OracleSpec, compare_oracle
from .outputs import jsonable, load_run_dir, write_report, write_run_dir
from .solver import Trajectory, run
from .study import convergence_study

logger = logging.getLogger("smoluchowski")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def run_diagnostics(traj: Trajectory, spec: RunSpec) -> dict:
    """Residuals, conservation or ledger error and the a priori bound report."""
    d = spec.diagnostics
    m = traj.moments
    M1_0 = float(m[0, 3])
    out: dict = {"mass": {
        "max_drift": float(np.max(np.abs(m[:, 3] - M1_0)) / M1_0),
        "max_ledger_error": float(np.max(np.abs(m[:, 3] + traj.loss - M1_0)) / M1_0),
        "final_loss": float(traj.loss[-1]),
    }}
    if not d.enabled:
        return out
    t_end = float(traj.snapshots[-1].time)
    residuals = []
    if d.weak_form:
        for test in (D.one(), D.capped(d.q), D.indicator_above(d.q)):
            residuals.append(D.weak_form_residual(traj, test, t_end))
        if d.q <= traj.grid.hi:
            residuals.append(D.mass_balance_finite_q(traj, d.q, t_end))
        residuals.append(D.tail_identity(traj, d.q, t_end))
        residuals.append(D.mass_balance_finite_q(traj, traj.grid.hi, t_end))
    out["residuals"] = [r.to_dict() | {"scaled": r.scaled} for r in residuals]

    out["bounds"] = None
    if d.bounds:
        if not traj.kernel.linear_growth:
            out["bounds_skipped"] = "kernel grows faster than linearly; the bounds do not apply"
        elif not 1 < d.lam < traj.truncation.n:
            out["bounds_skipped"] = f"lambda={d.lam} is not in (1, n)"
        else:
            init = traj.snapshots[0]
            weights = (build_vallee_poussin(init, "sigma1"),
                       build_vallee_poussin(init, "sigma2", beta=traj.beta))
            report = D.check_apriori_bounds(traj, weights, d.lam, t_end)
            out["bounds"] = report.to_dict()
    return out


def _report(traj: Trajectory, spec: RunSpec) -> dict:
    k = traj.kernel
    return {
        "config_sha256": spec.hash,
        "kernel": {"name": k.name, "beta": k.beta, "k": k.k_bound, "params": dict(k.params),
                   "linear_growth": k.linear_growth},
        "truncation": {"n": traj.truncation.n, "theta": traj.truncation.theta},
        "grid": {"min": traj.grid.lo, "max": traj.grid.hi, "cells": traj.grid.cells,
                 "ratio": traj.grid.ratio},
        "time": {"T": float(traj.times[-1]), "dt": traj.dt, "steps": len(traj.times) - 1,
                 "snapshots": len(traj.snapshots)},
        "initial_lost_mass": traj.snapshots[0].lost_mass,
        "diagnostics": run_diagnostics(traj, spec),
    }


def run_command(config_path: str | Path, out_dir: str | Path | None = None) -> int:
    spec = load_config(config_path)
    out = Path(out_dir) if out_dir is not None else Path("runs") / Path(config_path).stem
    traj = run(spec.run)
    report = _report(traj, spec)
    write_run_dir(out, traj, report, spec.hash, Path(config_path))
    diag = report["diagnostics"]
    print(f"wrote {out}/moments.csv, snapshots.csv, report.json")
    print(f"M_1 drift {diag['mass']['max_drift']:.3e}   ledger error {diag['mass']['max_ledger_error']:.3e}")
    for r in diag.get("residuals", []):
        print(f"  {r['name']:<28} scaled residual {r['scaled']:.3e}  "
              f"{'pass' if r['passed'] else 'FAIL'}")
    if diag.get("bounds"):
        print(f"  a priori bounds: {'pass' if diag['bounds']['passed'] else 'FAIL'}")
    return EXIT_OK


def _parse_levels(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--n expects comma-separated numbers, got {text!r}") from None


def study_command(config_path: str | Path, n_text: str | None, out_dir: str | Path | None) -> int:
    spec = load_config(config_path)
    levels = _parse_levels(n_text) if n_text else list(spec.study_n)
    report = convergence_study(spec, levels)
    print(report.format_table())
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(out / "study.json", report.to_dict())
    return EXIT_CHECK if report.decreasing is False else EXIT_OK


def _parse_oracle(text: str, spec: RunSpec, t_max: float | None) -> OracleSpec:
    kind, _, arg = text.partition(":")
    if kind == "constant_exact":
        return OracleSpec("constant_exact", t_max=t_max)
    if kind == "moment_ode":
        if not arg:
            raise ConfigError("moment_ode oracle needs a kernel class, e.g. moment_ode:multiplicative")
        return OracleSpec("moment_ode", kernel_class=arg, t_max=t_max)
    if kind == "reference":
        try:
            r = int(arg or "2")
        except ValueError:
            raise ConfigError(f"reference refinement must be an integer, got {arg!r}") from None
        return OracleSpec("reference_run", config=spec.run, refinement=r, t_max=t_max)
    raise ConfigError(f"unknown oracle {text!r}")


def compare_command(run_dir: str | Path, oracle: str, t_max: float | None) -> int:
    traj, spec = load_run_dir(run_dir)
    result = compare_oracle(traj, _parse_oracle(oracle, spec, t_max))
    print(json.dumps(jsonable(result), indent=2, sort_keys=True))
    return EXIT_OK


def audit_command(config_path: str | Path, lo: float, hi: float, count: int) -> int:
    spec = load_config(config_path)
    kernel = spec.run.kernel
    rep = verify_hypotheses(kernel, SampleSpec(lo, hi, count))
    print(f"kernel {kernel.name}  beta={kernel.beta:.6g}  declared k={kernel.k_bound:g}")
    for name in ("symmetric", "nonnegative", "envelope_holds", "regimes_hold"):
        print(f"  {name:<16} {getattr(rep, name)}")
    print(f"  sampled k (envelope) {rep.minimal_sampled_k:.6g} at {rep.worst_pair}")
    print(f"  sampled k (regimes)  {rep.minimal_regime_k:.6g}")
    if not kernel.linear_growth:
        print("  note: grows faster than linearly at large volumes")
    ok = rep.symmetric and rep.nonnegative and rep.envelope_holds
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smoluchowski",
                                description="Truncated coagulation solver and certificates.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="integrate one configuration and write outputs")
    r.add_argument("config")
    r.add_argument("-o", "--out", help="output directory (default runs/<config stem>)")

    s = sub.add_parser("study", help="conservative vs non-conservative runs over truncation levels")
    s.add_argument("config")
    s.add_argument("--n", help="comma-separated truncation levels (default [study] n)")
    s.add_argument("-o", "--out", help="directory for study.json")

    c = sub.add_parser("compare", help="compare a run directory with an oracle")
    c.add_argument("trajectory", help="run directory written by 'run'")
    c.add_argument("--oracle", required=True,
                   help="constant_exact | moment_ode:<constant|additive|multiplicative> | reference:<r>")
    c.add_argument("--t-max", type=float, default=None)

    a = sub.add_parser("audit-kernel", help="sample the kernel growth hypotheses")
    a.add_argument("config")
    a.add_argument("--lo", type=float, default=1e-6)
    a.add_argument("--hi", type=float, default=1e6)
    a.add_argument("--count", type=int, default=100)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "run":
            return run_command(args.config, args.out)
        if args.verb == "study":
            return study_command(args.config, args.n, args.out)
        if args.verb == "compare":
            return compare_command(args.trajectory, args.oracle, args.t_max)
        return audit_command(args.config, args.lo, args.hi, args.count)
    except (ConfigError, DataError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, BlowUpError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
