"""Command-line front end: reproducible runs, verification, and benches.

Subcommands
-----------
run     integrate one scheme on one problem, emit per-iteration CSV/JSON
verify  sample the weak-gradient (or gradient-dominance) inequalities
bench   reproduce the convex / strongly-convex comparison benches
rates   print the per-kind contraction factors for given L, mu, d

Exit codes: 0 pass, 1 certificate or verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from math import sqrt
from pathlib import Path

import numpy as np

from .problems import get_problem, problem_keys
from .schemes import OPTIMAL, Scheme, SchemeConfig, ZStrategy, run_scheme
from .solvers import SolveConfig
from .verify import (
    certify_trace,
    check_pl_conditions,
    check_wdg_inequality,
    factor_formula,
    lyapunov_series,
)
from .wdg import WdgKind, params_for, parse_kind, pl_params_for

__all__ = ["main", "build_parser", "rates_table", "bench_appendix_f"]


def _fmt(v) -> str:
    # 17 significant digits: exact round-trip for 64-bit floats
    return f"{float(v):.17g}"


def _parse_vector(text):
    if text is None:
        return None
    return np.array([float(t) for t in text.split(",")])


def _parse_h(text):
    return OPTIMAL if text == OPTIMAL else float(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wdgopt", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    seed_default = int(os.environ.get("WDG_OPT_SEED", "0"))

    run = sub.add_parser("run", help="run a scheme and emit the trace")
    run.add_argument("--problem", required=True, help=f"one of {', '.join(problem_keys())} or quad:<file>")
    run.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    run.add_argument("--wdg", default="ee", help="kind key: ee, ie, mid, avf, gonzalez, itohabe, sum:<a>+<b>")
    run.add_argument("--h", default=OPTIMAL, help="step size, or 'optimal'")
    run.add_argument("--iters", type=int, default=1000)
    run.add_argument("--x0", default=None, help="comma-separated start, e.g. '2,4'")
    run.add_argument("--v0", default=None, help="comma-separated initial velocity (defaults to x0)")
    run.add_argument("--z-strategy", default="coupled", choices=[z.value for z in ZStrategy])
    run.add_argument("--imp-tol", type=float, default=1e-10)
    run.add_argument("--imp-maxiter", type=int, default=200)
    run.add_argument("--seed", type=int, default=seed_default)
    fmt = run.add_mutually_exclusive_group()
    fmt.add_argument("--csv", action="store_true", help="CSV output (default)")
    fmt.add_argument("--json", action="store_true", help="JSON output")
    run.add_argument("--out", default=None, help="output path (default: stdout)")

    ver = sub.add_parser("verify", help="sample the defining inequalities")
    ver.add_argument("--problem", required=True)
    ver.add_argument("--wdg", required=True)
    ver.add_argument("--samples", type=int, default=100_000)
    ver.add_argument("--seed", type=int, default=seed_default)
    ver.add_argument("--tol", type=float, default=1e-8)
    ver.add_argument("--json", action="store_true")
    ver.add_argument("--out", default=None)

    ben = sub.add_parser("bench", help="comparison benches with CSV curves")
    ben.add_argument("--which", required=True, choices=["convex", "sc"])
    ben.add_argument("--out", required=True, help="output directory")
    ben.add_argument("--iters", type=int, default=None)

    rat = sub.add_parser("rates", help="per-kind contraction factors")
    rat.add_argument("--L", type=float, required=True)
    rat.add_argument("--mu", type=float, required=True)
    rat.add_argument("--d", type=int, default=2)
    return p


# ---------------------------------------------------------------------------
# run


def _trace_columns(trace, f):
    K = trace.iterations
    bound = np.full(K + 1, np.nan)
    lyap = np.full(K + 1, np.nan)
    cert = None
    try:
        cert = certify_trace(trace)
        bound[np.asarray(cert.k, dtype=int)] = cert.bounds
    except (ValueError, TypeError):
        pass
    try:
        lyap = lyapunov_series(trace, f)
    except (ValueError, TypeError):
        pass
    return cert, bound, lyap


def _cmd_run(args) -> int:
    f = get_problem(args.problem)
    scheme = Scheme(args.scheme)
    kind = parse_kind(args.wdg)
    cfg = SchemeConfig(
        scheme=scheme,
        x0=_parse_vector(args.x0),
        h=_parse_h(args.h),
        iterations=args.iters,
        z_strategy=ZStrategy(args.z_strategy),
        v0=_parse_vector(args.v0),
        solver=SolveConfig(tol=args.imp_tol, max_iter=args.imp_maxiter),
    )
    trace = run_scheme(f, kind, cfg)
    cert, bound, lyap = _trace_columns(trace, f)
    ks = np.arange(trace.iterations + 1)

    if args.json:
        payload = {
            "problem": f.name,
            "scheme": trace.scheme.value,
            "wdg": trace.kind,
            "h": trace.h,
            "iterations": trace.iterations,
            "seed": args.seed,
            "certificate": None
            if cert is None
            else {
                "bound": cert.bound_id,
                "passed": cert.passed,
                "first_violation": cert.first_violation,
                "step_within_bound": cert.step_within_bound,
            },
            "records": [
                {
                    "k": int(k),
                    "t": k * trace.h,
                    "f_gap": trace.f_gap[k],
                    "bound": None if np.isnan(bound[k]) else bound[k],
                    "lyapunov": None if np.isnan(lyap[k]) else lyap[k],
                    "inner_iters": int(trace.inner_iters[k]),
                }
                for k in ks
            ],
        }
        text = json.dumps(payload, indent=2)
    else:
        lines = ["k,t,f_gap,bound,lyapunov,inner_iters"]
        for k in ks:
            lines.append(
                f"{k},{_fmt(k * trace.h)},{_fmt(trace.f_gap[k])},{_fmt(bound[k])},"
                f"{_fmt(lyap[k])},{trace.inner_iters[k]}"
            )
        text = "\n".join(lines) + "\n"

    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if cert is not None and cert.step_within_bound is not False and not cert.passed:
        print(f"certificate {cert.bound_id} violated at k={cert.first_violation}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# verify


def _cmd_verify(args) -> int:
    f = get_problem(args.problem)
    kind = parse_kind(args.wdg)
    if f.pl_constant is not None and f.strong_convexity == 0:
        report = check_pl_conditions(f, kind, pl_params_for(f, kind), n=args.samples, seed=args.seed, tol=args.tol)
    else:
        params = params_for(f, kind)
        report = check_wdg_inequality(f, kind, params, n=args.samples, seed=args.seed, tol=args.tol)
    if args.json:
        text = json.dumps(report.as_dict(), indent=2)
    else:
        status = "pass" if report.passed else "FAIL"
        text = (
            f"{report.label} wdg={args.wdg} samples={report.samples} "
            f"max_violation={report.max_violation:.3e} tol={report.tol:g} -> {status}"
        )
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# bench


def _bench_tasks(which: str, iterations):
    if which == "convex":
        f = get_problem("quartic2d")
        K = iterations or 10_000
        hs = [s / sqrt(f.smoothness) for s in (1.0, 0.7, 0.4)]
        tasks = [("wdg-c", Scheme.ACCEL_CONVEX, h, K) for h in hs]
        tasks += [("nag-c", Scheme.NAG_C, h, K) for h in hs]
        return f, tasks
    f = get_problem("quadratic2d")
    K = iterations or 2_000
    L, mu = f.smoothness, f.strong_convexity
    h_opt = 1.0 / (sqrt(L) - sqrt(mu))
    h_prev = sqrt(mu) / (L - mu)
    h07, h04 = 0.7 / sqrt(L), 0.4 / sqrt(L)
    tasks = [("wdg-sc", Scheme.ACCEL_SC, h, K) for h in (h_opt, h07, h04)]
    tasks += [("wdg2-sc", Scheme.ACCEL_SC, h, K) for h in (h_opt, h07, h04, h_prev)]
    tasks += [("nag-sc", Scheme.NAG_SC, h, K) for h in (1.0 / sqrt(L), h07, h04)]
    return f, tasks


def _bench_one(f, method, scheme, h, K, out_dir):
    cfg = SchemeConfig(
        scheme=scheme,
        h=h,
        iterations=K,
        z_strategy=ZStrategy.PREV if method == "wdg2-sc" else ZStrategy.COUPLED,
    )
    trace = run_scheme(f, WdgKind.EXPLICIT_EULER, cfg)
    name = f"{method}_h{h:.6g}.csv"
    lines = ["k,f_gap,x1,x2"]
    for k in range(trace.iterations + 1):
        lines.append(f"{k},{_fmt(trace.f_gap[k])},{_fmt(trace.xs[k, 0])},{_fmt(trace.xs[k, 1])}")
    (Path(out_dir) / name).write_text("\n".join(lines) + "\n")
    entry = {"method": method, "h": h, "file": name, "certified": None, "bound_ok": None, "first_violation": None}
    if scheme in (Scheme.ACCEL_CONVEX, Scheme.ACCEL_SC):
        cert = certify_trace(trace)
        entry["certified"] = cert.step_within_bound
        entry["bound_ok"] = cert.passed
        entry["first_violation"] = cert.first_violation
    return entry


def bench_appendix_f(which: str, out_dir, iterations=None) -> dict:
    """Run the convex or strongly-convex comparison bench.

    Emits one CSV per (method, step size) pair into ``out_dir`` plus a
    ``summary.json`` with certificate flags.  Methods whose step exceeds
    their certified limit are reported with ``certified=False`` and their
    bound flag is informational only.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    f, tasks = _bench_tasks(which, iterations)
    with ThreadPoolExecutor(max_workers=min(4, len(tasks))) as pool:
        futures = [pool.submit(_bench_one, f, m, s, h, K, out) for (m, s, h, K) in tasks]
        entries = [fut.result() for fut in futures]
    ok = all(e["bound_ok"] in (True, None) for e in entries if e["certified"])
    summary = {"which": which, "problem": f.name, "runs": entries, "all_certified_pass": ok}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def _cmd_bench(args) -> int:
    summary = bench_appendix_f(args.which, args.out, args.iters)
    n = len(summary["runs"])
    print(f"bench {args.which}: {n} runs -> {args.out} (certified pass: {summary['all_certified_pass']})")
    return 0 if summary["all_certified_pass"] else 1


# ---------------------------------------------------------------------------
# rates


def rates_table(L: float, mu: float, d: int = 2) -> str:
    """Per-kind optimal contraction factors, symbolic and numeric.

    Geometric rates need strong convexity; with mu = 0 every row is n/a.
    """
    rows = [f"contraction factors at the largest certified step (L={L:g}, mu={mu:g}, d={d})", ""]
    header = f"{'kind':<10} {'gradient-flow factor':<28} {'value':<22} {'accelerated factor':<32} {'value':<22}"
    rows.append(header)
    rows.append("-" * len(header))
    for kind in WdgKind:
        if mu <= 0:
            gf_sym = gf_val = acc_sym = acc_val = "n/a (needs mu > 0)"
        else:
            gf_sym, gf_fn = factor_formula(kind, accelerated=False)
            acc_sym, acc_fn = factor_formula(kind, accelerated=True)
            gf_val = f"{gf_fn(L, mu, d):.12g}"
            acc_val = f"{acc_fn(L, mu, d):.12g}"
        rows.append(f"{kind.value:<10} {gf_sym:<28} {gf_val:<22} {acc_sym:<32} {acc_val:<22}")
    return "\n".join(rows)


def _cmd_rates(args) -> int:
    print(rates_table(args.L, args.mu, args.d))
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "verify": _cmd_verify, "bench": _cmd_bench, "rates": _cmd_rates}
    try:
        return handlers[args.command](args)
    except (ValueError, TypeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
