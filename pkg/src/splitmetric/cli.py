"""Command-line front end: ``splitmetric <command> ...``.

Exit status is 0 on success, 2 for usage or domain errors and 1 when an
internal numerical procedure fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import databench, integrity, jacobi_moments as jm, montecarlo
from ._parallel import resolve_threads
from .errors import DomainError, SplitMetricError

log = logging.getLogger("splitmetric")

FORMATS = ("table", "csv", "json")
DEFAULT_TRIALS = 100_000


# -- output -----------------------------------------------------------------


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _table_cell(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def render(rows: list[dict], fmt: str, summary: dict | None = None) -> tuple[str, str]:
    """Return ``(stdout_text, stderr_text)`` for ``rows`` in ``fmt``.

    CSV stays a single rectangular table; its summary goes to stderr as
    comment lines.
    """
    cols = list(rows[0]) if rows else []
    if fmt == "json":
        doc: dict[str, Any] = {"rows": rows}
        if summary is not None:
            doc["summary"] = summary
        return json.dumps(doc, indent=2, allow_nan=True) + "\n", ""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_csv_cell(r[c]) for c in cols])
        err = "".join(f"# {k}={_csv_cell(v)}\n" for k, v in (summary or {}).items())
        return buf.getvalue(), err
    cells = [cols] + [[_table_cell(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    if summary:
        lines.append("")
        lines.extend(f"{k}: {_table_cell(v)}" for k, v in summary.items())
    return "\n".join(lines) + "\n", ""


def _emit(args, rows, summary=None) -> None:
    out, err = render(rows, args.format, summary)
    sys.stdout.write(out)
    if err:
        sys.stderr.write(err)


# -- commands ---------------------------------------------------------------


def cmd_solve(args) -> int:
    problem = integrity.SplitProblem(args.m, args.n)
    p_star = integrity.optimal_p(problem)
    root = integrity.solve_real_root(problem)
    row = {
        "m": problem.m,
        "n": problem.n,
        "p_star": p_star,
        "ratio": p_star / problem.m,
        "f_at_p_star": integrity.integrity_f(problem, p_star),
        "real_root": root,
    }
    nearest = math.floor(root + 0.5)
    if nearest != p_star:
        log.info("nearest-integer rounding of the root (%d) differs from the f-argmin (%d)", nearest, p_star)
    _emit(args, [row])
    return 0


def cmd_curve(args) -> int:
    curve = integrity.integrity_curve(integrity.SplitProblem(args.m, args.n))
    rows = [{"p": p, "f": f} for p, f in curve.entries]
    _emit(args, rows, {"argmin_p": curve.argmin_p} if args.format != "csv" else None)
    if args.plot:
        from .plotting import plot_curve

        plot_curve(curve, args.plot)
    return 0


def cmd_asymptotic(args) -> int:
    rows = []
    for n in args.n:
        for m in args.m:
            problem = integrity.SplitProblem(m, n)
            approx = integrity.asymptotic_p(problem, args.order)
            root = integrity.solve_real_root(problem)
            rows.append({
                "m": m,
                "n": n,
                "order": args.order,
                "expansion": approx,
                "real_root": root,
                "ratio": root / approx,
                "log_ratio": math.log(root / approx) if approx > 0 else None,
            })
    _emit(args, rows)
    if args.plot:
        from .plotting import plot_asymptotic

        plot_asymptotic(rows, args.plot)
    return 0


def cmd_simulate(args) -> int:
    config = montecarlo.SimulationConfig(args.m, args.n, args.sigma, args.trials, args.seed)
    cmp = montecarlo.empirical_vs_analytic(config, threads=args.threads)
    rows = [
        {
            "p": e.p,
            "mean_sq_dev": e.mean_sq_dev,
            "std_err": e.std_err,
            "normalized": r.normalized,
            "analytic_f": r.analytic_f,
        }
        for e, r in zip(cmp.result.per_p, cmp.rows)
    ]
    summary = {
        "empirical_argmin": cmp.empirical_argmin,
        "p_star": cmp.optimal_p,
        "argmin_gap": cmp.argmin_gap,
        "trials": config.trials,
        "seed": config.seed,
        "sigma": config.sigma,
    }
    _emit(args, rows, summary)
    if args.plot:
        from .plotting import plot_overlay

        plot_overlay(cmp, args.plot)
    return 0


_MOMENTS = (
    ("<x^-1>", "inv1", jm.inv_moment_1),
    ("<x^-2>", "inv2", jm.inv_moment_2),
    ("<x1^-1 x2^-1>", "cross", jm.inv_cross_moment),
)


def cmd_moments(args) -> int:
    m, n, p = args.m, args.n, args.p
    alpha, beta = 0.5 * (p - n + 1), 0.5 * (m - p - n + 1)
    params = jm.JacobiParams(n, alpha, beta)
    eigs = jm.sample_jacobi(m, n, p, args.trials, args.seed, threads=args.threads)
    sampled = jm.empirical_moments(eigs)
    rows = []
    for label, key, fn in _MOMENTS:
        if key not in sampled:
            continue
        mean, se = sampled[key]
        try:
            exact = fn(params)
        except jm.DivergentMomentError:
            exact = None
        rows.append({
            "moment": label,
            "closed_form": exact,
            "sample_mean": mean,
            "std_err": se,
            "rel_err": abs(mean / exact - 1) if exact is not None else None,
            "status": "ok" if exact is not None else "divergent",
        })
    _emit(args, rows, {"alpha": alpha, "beta": beta, "samples": args.trials, "seed": args.seed})
    return 0


def _policy_grid(reports: list[databench.BenchReport]) -> list[dict]:
    labels = {"half": "p = m/2", "three_quarter": "p = 3m/4", "optimal": "p = p*(m,n)"}
    names = [r.source for r in reports]
    if len(set(names)) < len(names):
        names = [f"{k}:{s}" for k, s in enumerate(names, 1)]
    rows = []
    for policy in databench.POLICIES:
        row = {"": labels[policy]}
        row.update({c: r.policy(policy).mean_loss for c, r in zip(names, reports)})
        rows.append(row)
    rows.append({"": "p*(m,n)/m", **{c: round(r.optimal_ratio, 4) for c, r in zip(names, reports)}})
    rows.append({"": "(m,n)", **{c: f"({r.m}, {r.n})" for c, r in zip(names, reports)}})
    return rows


def cmd_bench(args) -> int:
    reports = []
    for path in args.path:
        data = databench.load_dataset(
            path,
            target_column=args.target_column,
            drop_columns=args.drop_columns,
            header=args.header,
            missing_token=args.missing_token,
            delimiter=args.delimiter,
        )
        reports.append(databench.bench_table(data, args.permutations, args.seed, threads=args.threads))
    if args.format == "table" and len(reports) > 1:
        _emit(args, _policy_grid(reports))
    else:
        rows = [dict(rec, source=rep.source) for rep in reports for rec in rep.records()]
        _emit(args, rows)
    if args.plot:
        from .plotting import plot_bench

        plot_bench(reports, args.plot)
    return 0


# -- parser -----------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _index_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default="table")
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="worker cap (default: $SPLITMETRIC_THREADS or 1); never changes output")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="splitmetric",
        description="Integrity-optimal train/test split sizes for linear regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="optimal training size p*(m, n)")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("curve", parents=[common], help="tabulate f(m, n, p) over p")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--plot", metavar="FILE", help="also render the curve to FILE")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("asymptotic", parents=[common], help="large-m expansion against the exact root")
    p.add_argument("--m", type=int, nargs="+", required=True, help="one or more dataset sizes")
    p.add_argument("--n", type=int, nargs="+", required=True, help="one or more dimensions")
    p.add_argument("--order", type=int, default=4, choices=(1, 2, 3, 4))
    p.add_argument("--plot", metavar="FILE", help="render log-ratio against m to FILE")
    p.set_defaults(func=cmd_asymptotic)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo integrity per p")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--trials", type=_positive_int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--plot", metavar="FILE", help="render simulated vs analytic curve to FILE")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("moments", parents=[common], help="closed-form vs sampled Jacobi moments")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--trials", type=_positive_int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("bench", parents=[common], help="permutation losses of split policies on CSV data")
    p.add_argument("path", nargs="+")
    p.add_argument("--target-column", type=int, default=0)
    p.add_argument("--drop-columns", type=_index_list, default=[], metavar="I,J,...")
    p.add_argument("--header", action="store_true", help="first row is a header")
    p.add_argument("--missing-token", default="?")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--permutations", type=_positive_int, default=databench.DEFAULT_PERMUTATIONS)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--plot", metavar="FILE", help="render relative losses to FILE")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"splitmetric: error: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"splitmetric: error: {exc}", file=sys.stderr)
        return 2
    except (SplitMetricError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"splitmetric: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
