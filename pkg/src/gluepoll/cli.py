"""Command-line front end: ``gluepoll {analyze,approx,simulate,compare}``.

Without ``--config`` the built-in five-station benchmark is used.  Output is
deterministic for fixed flags and seed.  Exit codes: 0 success, 2 invalid
input, 3 numerical non-convergence, 4 too few cycles for the statistics.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass

import numpy as np

from . import htlimits
from .approx import approx_table, c1_vector, pct_error
from .branching import NoConvergence, summarize
from .model import InvalidConfig, LoadProfile, ModelError, five_station_profile, load_config, require_stable
from .simulator import InsufficientCycles, run

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_STATISTICS = 0, 2, 3, 4

DEFAULT_APPROX_GRID = "0.1:0.9:0.1,0.95"
DEFAULT_COMPARE_GRID = "0.1:0.9:0.1,0.95"


def fmt(x) -> str:
    """Locale-free, fixed-precision rendering; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer, str)):
        return str(x)
    return f"{float(x):.10g}"


def parse_grid(text: str) -> list[float]:
    """``"0.1:0.9:0.1,0.95"`` -> inclusive ranges and single values, in order."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            try:
                a, b, step = (float(v) for v in part.split(":"))
            except ValueError:
                raise ModelError(f"bad grid range {part!r}; expected start:stop:step") from None
            if step <= 0 or b < a:
                raise ModelError(f"bad grid range {part!r}")
            k = int(round((b - a) / step))
            out += [round(a + j * step, 10) for j in range(k + 1)]
        else:
            try:
                out.append(float(part))
            except ValueError:
                raise ModelError(f"bad grid value {part!r}") from None
    if not out:
        raise ModelError("empty load grid")
    for rho in out:
        require_stable(rho)
    return out


def render(header: list[str], rows: list[list], form: str) -> str:
    cells = [[fmt(v) for v in row] for row in rows]
    if form == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(cells)
        return buf.getvalue()
    widths = [max(len(h), *(len(r[k]) for r in cells)) if cells else len(h) for k, h in enumerate(header)]

    def line(row):
        # labels left, numbers right
        return "  ".join(c.ljust(wd) if k == 0 else c.rjust(wd) for k, (c, wd) in enumerate(zip(row, widths)))

    lines = [line(header)] + [line(r) for r in cells]
    return "\n".join(lines) + "\n"


# -- analyze -----------------------------------------------------------------


def analyze_report(profile: LoadProfile, rho: float = 1.0, limits: bool = False) -> list[list]:
    """Flat ``[key, value]`` rows of the branching constants (and limit coefficients)."""
    s = summarize(profile, rho)
    rows = [
        ["n", s.n], ["rho", s.rho], ["xi", s.xi], ["delta", s.delta], ["A", s.A], ["alpha", s.alpha],
        ["b1", s.b1], ["b2", s.b2], ["b_abs", s.b_abs], ["r", s.r],
        ["scale", s.scale], ["workload_scale", s.workload_scale],
    ]  # fmt: skip
    for name, vec in (("w_hat", s.w_hat), ("u_hat", s.u_hat), ("g", s.g), ("f_exhaustive", s.f_exhaustive)):
        rows += [[f"{name}[{i + 1}]", v] for i, v in enumerate(vec)]
    rows += [[f"c1[{i + 1}]", v] for i, v in enumerate(c1_vector(s))]
    if limits:
        for epoch in htlimits.EPOCHS:
            for i in range(s.n):
                lim = htlimits.embedded_limit(s, epoch, i)
                rows += [[f"{epoch}[{i + 1}].{lab}", c] for lab, c in zip(lim.labels, lim.coefficient)]
    return rows


def cmd_analyze(args, profile: LoadProfile) -> str:
    rho = 1.0 if args.rho is None else args.rho
    return render(["key", "value"], analyze_report(profile, rho, args.limits), args.format or "text")


# -- approx ------------------------------------------------------------------


def cmd_approx(args, profile: LoadProfile) -> str:
    rows = approx_table(summarize(profile), parse_grid(args.rho_grid))
    return render(["rho", "station", "approx_mean"], [[r.rho, r.station, r.approx_mean] for r in rows], args.format or "text")


# -- simulate ----------------------------------------------------------------

MODE_FLAGS = {"coin": "glue_coin", "clocks": "exact_clocks"}


def cmd_simulate(args, profile: LoadProfile) -> str:
    est = run(profile, args.rho, args.cycles, args.warmup, args.seed, MODE_FLAGS[args.mode], args.reps)
    rows = [
        [r.epoch, "" if r.station is None else r.station + 1, r.coordinate, r.mean, r.var, r.ci95, r.n]
        for r in est.rows
    ]
    return render(["epoch", "station", "coordinate", "mean", "var", "ci95", "n"], rows, args.format or "csv")


# -- compare -----------------------------------------------------------------


@dataclass(frozen=True)
class CompareRow:
    rho: float
    station: str
    sim_mean: float
    sim_ci95: float | None
    approx_mean: float
    pct_error: float | None


def grid_seed(seed: int, k: int) -> int:
    """Independent root seed for the k-th grid point."""
    return int(np.random.SeedSequence([seed, k]).generate_state(1, np.uint64)[0])


def compare(
    profile: LoadProfile, rhos, cycles: int, seed: int, reps: int = 1, mode: str = "glue_coin"
) -> list[CompareRow]:
    """Simulated versus approximated mean numbers of customers per station and in total.

    The error is only reported when the simulated mean is positive and its
    confidence interval excludes zero.
    """
    s = summarize(profile)
    approx = {(r.rho, r.station): r.approx_mean for r in approx_table(s, rhos)}
    rows = []
    for k, rho in enumerate(rhos):
        est = run(profile, rho, cycles, seed=grid_seed(seed, k), mode=mode, reps=reps)
        for station, coord in [(str(i + 1), f"n{i + 1}") for i in range(s.n)] + [("total", "total")]:
            sim = est.get("time_average", None, coord)
            ap = approx[(float(rho), station)]
            ok = sim.mean > 0 and sim.ci95 is not None and sim.mean - sim.ci95 > 0
            rows.append(CompareRow(float(rho), station, sim.mean, sim.ci95, ap, pct_error(ap, sim.mean) if ok else None))
    return rows


def cmd_compare(args, profile: LoadProfile) -> str:
    rows = compare(profile, parse_grid(args.rho_grid), args.cycles, args.seed, args.reps)
    header = ["rho", "station", "sim_mean", "sim_ci95", "approx_mean", "pct_error"]
    body = [[r.rho, r.station, r.sim_mean, r.sim_ci95, r.approx_mean, r.pct_error] for r in rows]
    return render(header, body, args.format or "csv")


# -- entry point -------------------------------------------------------------


def _common_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--config", default=default(None), help="YAML system description (default: five-station benchmark)")
    parser.add_argument("--format", choices=("text", "csv"), default=default(None))
    parser.add_argument("--seed", type=int, default=default(0))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gluepoll", description="Polling system with retrials and glue periods.")
    _common_flags(parser, lambda v: v)
    # the same flags are accepted after the subcommand without clobbering earlier ones
    common = argparse.ArgumentParser(add_help=False)
    _common_flags(common, lambda v: argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="branching constants and limit coefficients")
    p.add_argument("--rho", type=float, default=None, help="load at which xi and g are evaluated (default 1)")
    p.add_argument("--limits", action="store_true", help="also list the embedded limit coefficients")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("approx", parents=[common], help="approximate mean numbers of customers")
    p.add_argument("--rho-grid", default=DEFAULT_APPROX_GRID)
    p.set_defaults(handler=cmd_approx)

    p = sub.add_parser("simulate", parents=[common], help="simulate and report batch-means estimates")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--cycles", type=int, default=10_000)
    p.add_argument("--warmup", type=int, default=None, help="cycles discarded per replication (default 10%%)")
    p.add_argument("--mode", choices=tuple(MODE_FLAGS), default="coin")
    p.add_argument("--reps", type=int, default=1)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="simulation versus approximation over a load grid")
    p.add_argument("--rho-grid", default=DEFAULT_COMPARE_GRID)
    p.add_argument("--cycles", type=int, default=20_000)
    p.add_argument("--reps", type=int, default=1)
    p.set_defaults(handler=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        profile = five_station_profile() if args.config is None else load_config(args.config)
        sys.stdout.write(args.handler(args, profile))
    except InsufficientCycles as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATISTICS
    except InvalidConfig as exc:
        print("error: invalid configuration", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    except (ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NoConvergence, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
