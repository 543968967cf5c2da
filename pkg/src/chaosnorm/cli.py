"""``chaosnorm`` command line.

Every output is a CSV preceded by ``#`` header lines: tool version, the full run
configuration as JSON, the generator version, and one ``# run:`` line with the
timestamp and cache counters. Only the ``# run:`` line changes between identical
invocations.

Exit codes: 0 success, 2 usage error, 3 computation error. Nothing is written to
the output on a nonzero exit.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .asymptotics import asymptotic_report, report_csv as asymptotic_csv
from .coefficients import (CACHE_POLICIES, CacheError, MissingCoefficientError, cache_dir_from_env,
                           chaos_norm_partial, coefficient_via_moments, table_build)
from .montecarlo import (GENERATOR_VERSION, MIN_DISTANCE_COUNT, empirical_kolmogorov, empirical_wasserstein1,
                         empirical_wasserstein1_stderr, mc_coefficients, sample_fn)
from .patterns import enumerate_patterns
from .stein import MAX_SUPPORTED_M, bound_report, classical_bound, report_csv as bound_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_COMPUTE = 3


class UsageError(Exception):
    pass


def parse_grid(text: str) -> list[int]:
    """``start:end:linear|geometric``, inclusive; geometric steps double."""
    try:
        start_text, end_text, kind = text.split(":")
        start, end = int(start_text), int(end_text)
    except ValueError:
        raise UsageError(f"malformed grid {text!r}; expected start:end:linear|geometric") from None
    if kind not in ("linear", "geometric"):
        raise UsageError(f"grid kind must be linear or geometric, got {kind!r}")
    if start < 1:
        raise UsageError(f"grid start must be >= 1, got {start}")
    if kind == "linear":
        grid = list(range(start, end + 1))
    else:
        grid = []
        n = start
        while n <= end:
            grid.append(n)
            n *= 2
    if not grid:
        raise UsageError(f"grid {text!r} is empty")
    return grid


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _loglog_slope(ns: Sequence[int], values: Sequence[float]) -> float | None:
    if len(ns) < 2 or any(v <= 0 for v in values):
        return None
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


class Output:
    """Collects header and body lines; written in one piece only after success."""

    def __init__(self, config: dict):
        self.config = config
        self.notes: list[str] = []
        self.run_fields: dict[str, object] = {}
        self.body: list[str] = []

    def note(self, text: str) -> None:
        self.notes.append(text)

    def render(self) -> str:
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        run = " ".join(f"{k}={v}" for k, v in self.run_fields.items())
        head = [
            f"# chaosnorm {__version__}",
            "# config: " + json.dumps(self.config, sort_keys=True),
            f"# generator: {GENERATOR_VERSION}",
            f"# run: {stamp} {run}".rstrip(),
        ]
        head += [f"# {n}" for n in self.notes]
        return "\n".join(head + self.body) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table(args, n_list: Sequence[int], K: int, out: Output):
    table = table_build(n_list, K, cache_policy=args.cache_policy, cache_dir=args.cache_dir)
    out.run_fields["cache_hits"] = table.metadata.get("cache_hits", 0)
    out.run_fields["cache_misses"] = table.metadata.get("cache_misses", 0)
    return table


def cmd_coeffs(args, out: Output) -> None:
    table = _table(args, [args.n], args.max_k, out)
    rows = table.rows(args.n)
    mc: dict = {}
    if args.mc_samples:
        batch = sample_fn(args.n, args.mc_samples, args.seed)
        patterns = [p for p, _ in rows]
        mc = dict(zip(patterns, mc_coefficients(patterns, args.n, batch)))
    out.body.append("pattern,n,value_exact,value_moments,delta,value_mc,mc_stderr")
    for p, exact in rows:
        moments = coefficient_via_moments(p, args.n)
        est, err = mc.get(p, (None, None))
        out.body.append(f'"{p}",{args.n},{_fmt(exact)},{_fmt(moments)},{_fmt(moments - exact)},{_fmt(est)},{_fmt(err)}')


def cmd_norm(args, out: Output) -> None:
    out.body.append("K,partial_sum")
    for K, s in enumerate(chaos_norm_partial(args.n, args.max_k)):
        out.body.append(f"{K},{_fmt(s)}")


def cmd_bound(args, out: Output) -> None:
    grid = args.grid
    k_top = (2 * args.m_max + args.r_max) // 2
    table = _table(args, grid, k_top, out)
    reports = [bound_report(table, n, args.m_max, args.r_max) for n in grid]
    slope = _loglog_slope(grid, [r.discrepancy for r in reports])
    out.note(f"discrepancy_loglog_slope: {_fmt(slope)}")
    out.body.extend(bound_csv(reports).splitlines())


def cmd_simulate(args, out: Output) -> None:
    batch = sample_fn(args.n, args.samples, args.seed)
    summary = batch.summary
    count = batch.count
    v = batch.values
    mean_err = float(np.std(v, ddof=1)) / math.sqrt(count)
    sq_err = float(np.std(v * v, ddof=1)) / math.sqrt(count)
    k_val, k_err = empirical_kolmogorov(batch)
    rows = [
        ("mean", summary["mean"], mean_err),
        ("second_moment", summary["second_moment"], sq_err),
        ("kolmogorov", k_val, k_err),
        ("wasserstein1", empirical_wasserstein1(batch), empirical_wasserstein1_stderr(batch)),
    ]
    out.body.append("n,seed,count,stat,value,stderr")
    for stat, value, err in rows:
        out.body.append(f"{args.n},{args.seed},{count},{stat},{_fmt(value)},{_fmt(err)}")


def cmd_compare(args, out: Output) -> None:
    grid = args.grid
    k_top = (2 * args.m_max + args.r_max) // 2
    table = _table(args, grid, k_top, out)
    out.body.append("n,discrepancy,last_shell_diag,armed,bound_K,classical_p3,classical_vacuous,"
                    "empirical_K,empirical_K_stderr,dominated,bound_W,empirical_W")
    for n in grid:
        batch = sample_fn(n, args.samples, args.seed)
        k_val, k_err = empirical_kolmogorov(batch)
        report = bound_report(table, n, args.m_max, args.r_max, empirical_kolmogorov=(k_val, k_err))
        classical = classical_bound(n, 3.0)
        dominated = k_val <= min(report.bound_kolmogorov + 2 * k_err, classical)
        out.body.append(",".join([
            str(n), _fmt(report.discrepancy), _fmt(report.kernel.truncation_diagnostic),
            str(report.domination_armed).lower(), _fmt(report.bound_kolmogorov), _fmt(classical),
            str(classical > 1.0).lower(), _fmt(k_val), _fmt(k_err), str(dominated).lower(),
            _fmt(report.bound_wasserstein), _fmt(empirical_wasserstein1(batch)),
        ]))


def cmd_asymptotics(args, out: Output) -> None:
    patterns = [p for k in range(args.max_k + 1) for p in enumerate_patterns(k, 2 * k + 1)]
    reports = [asymptotic_report(p, args.grid) for p in patterns]
    out.body.extend(asymptotic_csv(reports).splitlines())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaosnorm",
                                     description="Chaos expansion of the self-normalized Gaussian sum.")
    parser.add_argument("--version", action="version", version=f"chaosnorm {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", type=Path, help="output CSV (default: stdout)")
    common.add_argument("--cache-dir", type=Path, default=None,
                        help="coefficient cache directory (default: $CHAOSNORM_CACHE_DIR or ./.chaosnorm-cache)")
    common.add_argument("--cache-policy", choices=CACHE_POLICIES, default="readwrite")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", parents=[common], help="coefficient table with both exact paths and Monte Carlo")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--max-k", type=int, required=True)
    p.add_argument("--mc-samples", type=int, default=100_000, help="0 disables the Monte Carlo columns")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("norm", parents=[common], help="chaos-norm partial sums")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--max-k", type=int, required=True)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("bound", parents=[common], help="Stein discrepancy and distance bounds over a grid")
    p.add_argument("--n-grid", required=True)
    p.add_argument("--m-max", type=int, default=2)
    p.add_argument("--r-max", type=int, default=4)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("simulate", parents=[common], help="empirical distances of F_n to the normal law")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="analytic bounds against simulated distances")
    p.add_argument("--n-grid", required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m-max", type=int, default=2)
    p.add_argument("--r-max", type=int, default=4)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("asymptotics", parents=[common], help="decay exponents and limiting constants")
    p.add_argument("--max-k", type=int, default=2)
    p.add_argument("--n-grid", default=None, help="defaults to a doubling grid starting at 20 * order")
    p.set_defaults(func=cmd_asymptotics)
    return parser


def _validate(args) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise UsageError(msg)

    if getattr(args, "n_grid", None) is not None:
        args.grid = parse_grid(args.n_grid)
    else:
        args.grid = None
    cmd = args.command
    if cmd in ("coeffs", "norm"):
        need(args.n >= 2, f"--n must be >= 2, got {args.n}")
        need(args.max_k >= 0, f"--max-k must be >= 0, got {args.max_k}")
    if cmd == "coeffs":
        need(args.mc_samples >= 0, f"--mc-samples must be >= 0, got {args.mc_samples}")
    if cmd in ("bound", "compare"):
        need(min(args.grid) >= 2, "grid dimensions must be >= 2")
        need(1 <= args.m_max <= MAX_SUPPORTED_M, f"--m-max must be in 1..{MAX_SUPPORTED_M}, got {args.m_max}")
        need(args.r_max >= 0, f"--r-max must be >= 0, got {args.r_max}")
    if cmd == "simulate":
        need(args.n >= 1, f"--n must be >= 1, got {args.n}")
    if cmd in ("simulate", "compare"):
        need(args.samples >= MIN_DISTANCE_COUNT, f"--samples must be >= {MIN_DISTANCE_COUNT}, got {args.samples}")
    if cmd == "asymptotics":
        need(args.max_k >= 0, f"--max-k must be >= 0, got {args.max_k}")
        if args.grid is not None:
            need(len(args.grid) >= 4, "asymptotic fits need at least 4 grid points")
    if getattr(args, "seed", 0) < 0:
        raise UsageError(f"--seed must be nonnegative, got {args.seed}")


def _config(args) -> dict:
    skip = {"func", "output", "grid"}
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}
    if args.cache_dir is None:
        cfg["cache_dir"] = str(cache_dir_from_env())
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        _validate(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"chaosnorm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.cache_dir is None:
        args.cache_dir = cache_dir_from_env()
    out = Output(_config(args))
    func: Callable = args.func
    try:
        func(args, out)
        text = out.render()
        if args.output is None:
            sys.stdout.write(text)
        else:
            _write_atomic(args.output, text)
    except (ValueError, ArithmeticError, NotImplementedError, MissingCoefficientError, CacheError, OSError) as exc:
        print(f"chaosnorm: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
