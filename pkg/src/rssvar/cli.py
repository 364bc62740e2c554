"""Command-line interface.

Subcommands::

    rssvar table1   [--reps R] [--seed S] [--format csv|md] [--out PATH] [--workers W]
    rssvar table2   ... [--weights-file PATH]
    rssvar scenario --scheme {rss,jps,ds} --N N --k K --rho RHO --transform T ...
    rssvar sample   --scheme {rss,jps,ds} --N N --k K --rho RHO --transform T --seed S --out PATH
    rssvar estimate --input PATH --estimator {rss,m,jps,f,n,n_ds} [--k K] [--weights-file PATH]

Exit codes: 0 success, 1 usage error, 2 input-data error, 3 numerical or
degenerate error.

Sample files have one row per unit with columns ``role,y,x,rank``. ``role``
is ``measured`` or ``pool``; pool rows leave ``y`` and ``rank`` empty, and
double-sample rows leave ``rank`` empty. The concomitant pool is the ``x`` of
every row, measured rows first.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from rssvar.estimators import (
    EstimatorId,
    TableWeights,
    UnsupportedProfileError,
    concomitant_variance,
    upper_triangle,
    var_frey_feeman,
    var_jps_stratified,
    var_maceachern,
    var_rss_empirical,
)
from rssvar.kernreg import BandwidthSelectionError, InsufficientDataError
from rssvar.montecarlo import (
    DEFAULT_REPS,
    DEFAULT_SEED,
    DegenerateEstimatorError,
    Scenario,
    ScenarioError,
    ScenarioResult,
    reference_estimator,
    run_scenario,
    table_scenarios,
)
from rssvar.sampling import DesignError, RankingModel, Sample, Scheme, TargetTransform, draw_sample

log = logging.getLogger("rssvar")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
COLUMNS = ("role", "y", "x", "rank")
ESTIMATOR_CHOICES = {
    "rss": EstimatorId.RSS,
    "m": EstimatorId.M,
    "jps": EstimatorId.JPS,
    "f": EstimatorId.F,
    "n": EstimatorId.N,
    "concomitant": EstimatorId.N,
    "n_ds": EstimatorId.N_DS,
}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def fmt_num(v: float) -> str:
    return format(float(v), ".17g")


# --- file formats -------------------------------------------------------------


def write_sample_csv(sample: Sample, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(COLUMNS)
    ranked = sample.scheme is not Scheme.DS
    for y, x, r in zip(sample.y, sample.x, sample.rank):
        w.writerow(("measured", fmt_num(y), fmt_num(x), int(r) if ranked else ""))
    for x in sample.pool[sample.N:]:
        w.writerow(("pool", "", fmt_num(x), ""))


class SampleFile:
    """Parsed sample file: measured rows plus the concomitant pool."""

    def __init__(self, y, x, rank, pool, has_x: bool, has_rank: bool):
        self.y = np.asarray(y, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.rank = rank
        self.pool = np.asarray(pool, dtype=float)
        self.has_x = has_x
        self.has_rank = has_rank

    def strata(self, k: int) -> dict[int, np.ndarray]:
        ranks = np.asarray(self.rank)
        return {r: self.y[ranks == r] for r in range(1, k + 1)}


def _parse_float(cell: str, column: str, line: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise InputError(f"line {line}: column '{column}' is not numeric: {cell!r}") from None
    if not math.isfinite(v):
        raise InputError(f"line {line}: column '{column}' is not finite: {cell!r}")
    return v


def read_sample_csv(stream, k: Optional[int] = None, need: Sequence[str] = ()) -> SampleFile:
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError("empty input file") from None
    for col in ("role", "y", *need):
        if col not in header:
            raise InputError(f"missing required column '{col}'")
    idx = {c: header.index(c) for c in COLUMNS if c in header}
    has_x, has_rank = "x" in idx, "rank" in idx

    ys, xs, ranks, pool_only = [], [], [], []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        cell = {c: row[i].strip() for c, i in idx.items()}
        role = cell["role"]
        x = _parse_float(cell["x"], "x", line) if has_x else None
        if role == "measured":
            ys.append(_parse_float(cell["y"], "y", line))
            xs.append(x)
            r = cell.get("rank", "")
            if r:
                try:
                    r = int(r)
                except ValueError:
                    raise InputError(f"line {line}: column 'rank' is not an integer: {r!r}") from None
                if r < 1 or (k is not None and r > k):
                    raise InputError(f"line {line}: rank {r} outside 1..{k if k is not None else 'k'}")
                ranks.append(r)
            else:
                ranks.append(None)
        elif role == "pool":
            if cell["y"]:
                raise InputError(f"line {line}: pool rows must leave 'y' empty")
            if cell.get("rank"):
                raise InputError(f"line {line}: pool rows must leave 'rank' empty")
            pool_only.append(x)
        else:
            raise InputError(f"line {line}: role must be 'measured' or 'pool', got {role!r}")
    if not ys:
        raise InputError("no measured rows")
    pool = xs + pool_only if has_x else []
    return SampleFile(ys, xs if has_x else [], ranks, pool, has_x, has_rank)


def read_weights_file(path: Path) -> TableWeights:
    """Parse ``s_1 ... s_m : w_11 w_12 ... w_mm`` lines (upper triangle, row-major)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read weights file {path}: {exc}") from None
    table = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.count(":") != 1:
            raise InputError(f"{path}:{line_no}: expected 'sizes : weights'")
        left, right = line.split(":")
        try:
            profile = tuple(int(t) for t in left.split())
            flat = [float(t) for t in right.split()]
        except ValueError as exc:
            raise InputError(f"{path}:{line_no}: {exc}") from None
        if not profile or any(s < 1 for s in profile) or list(profile) != sorted(profile, reverse=True):
            raise InputError(f"{path}:{line_no}: sizes must be positive and non-increasing")
        try:
            table[profile] = upper_triangle(profile, flat)
        except ValueError as exc:
            raise InputError(f"{path}:{line_no}: {exc}") from None
        if not np.all(np.isfinite(table[profile])):
            raise InputError(f"{path}:{line_no}: weights must be finite")
    return TableWeights(table)


# --- table output -------------------------------------------------------------


def _rho_str(rho: float) -> str:
    return format(rho, "g")


def table_rows(results: Sequence[ScenarioResult]) -> list[tuple]:
    rows = []
    for r in results:
        s = r.scenario
        ref = reference_estimator(s.scheme)
        for e in s.estimators:
            if e is ref:
                continue
            rows.append((s.N, s.k, _rho_str(s.rho), s.transform.value, e.value, r.re[e]))
    return rows


def render_csv(results: Sequence[ScenarioResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("N", "k", "rho", "transform", "estimator", "RE"))
    for row in table_rows(results):
        w.writerow((*row[:5], fmt_num(row[5])))
    return buf.getvalue()


def render_markdown(results: Sequence[ScenarioResult]) -> str:
    """Wide layout: one line per (N, k, rho), grouped columns per target transform."""
    rows = table_rows(results)
    transforms = list(dict.fromkeys(r[3] for r in rows))
    ests = list(dict.fromkeys(r[4] for r in rows))
    cells = {(r[0], r[1], r[2], r[3], r[4]): r[5] for r in rows}
    labels = {t.value: t.label for t in TargetTransform}
    head = ["(N, k)", "rho"] + [f"{labels[t]} {e}" for t in transforms for e in ests]
    out = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for N, k, rho in dict.fromkeys((r[0], r[1], r[2]) for r in rows):
        vals = []
        for t in transforms:
            for e in ests:
                v = cells.get((N, k, rho, t, e))
                vals.append("n/a" if v is None else f"{v:.2f}")
        out.append("| " + " | ".join([f"({N}, {k})", rho, *vals]) + " |")
    return "\n".join(out) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from None


def _render(results, fmt: str) -> str:
    return render_markdown(results) if fmt == "md" else render_csv(results)


# --- commands -----------------------------------------------------------------


def _progress(done: list, total: int):
    def report(r: ScenarioResult):
        done.append(r)
        s = r.scenario
        log.info("[%d/%d] %s N=%d k=%d rho=%s %s  %s", len(done), total, s.scheme.name, s.N, s.k,
                 _rho_str(s.rho), s.transform.value,
                 "  ".join(f"{e.value}={v:.2f}" for e, v in r.re.items()))
    return report


def cmd_table(args) -> int:
    which = 1 if args.command == "table1" else 2
    weights = read_weights_file(args.weights_file) if getattr(args, "weights_file", None) else None
    if which == 2 and weights is None:
        log.info("no --weights-file given: Frey-Feeman estimator unavailable, column omitted")
    scenarios = table_scenarios(which, reps=args.reps, base_seed=args.seed, weights=weights)
    done: list = []
    report = _progress(done, len(scenarios))
    results = []
    for s in scenarios:
        r = run_scenario(s, workers=args.workers)
        report(r)
        results.append(r)
    _emit(_render(results, args.format), args.out)
    return EXIT_OK


def cmd_scenario(args) -> int:
    weights = read_weights_file(args.weights_file) if args.weights_file else None
    s = Scenario(args.scheme, args.N, args.k, args.rho, args.transform, reps=args.reps,
                 base_seed=args.seed, weights=weights if args.scheme == "jps" else None)
    r = run_scenario(s, workers=args.workers)
    _progress([], 1)(r)
    _emit(_render([r], args.format), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    rng = np.random.default_rng(args.seed)
    sample = draw_sample(args.scheme, args.N, args.k, RankingModel(args.rho), args.transform, rng)
    buf = io.StringIO()
    write_sample_csv(sample, buf)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def estimate_from_file(data: SampleFile, eid: EstimatorId, k: Optional[int], weights=None):
    ranked = eid in (EstimatorId.M, EstimatorId.JPS, EstimatorId.F)
    if ranked:
        if not data.has_rank:
            raise InputError("missing required column 'rank'")
        if any(r is None for r in data.rank):
            raise UsageError(f"estimator {eid.value} needs a judgment rank on every measured row")
        k = k if k is not None else max(data.rank)
        strata = data.strata(k)
    if eid is EstimatorId.RSS:
        return var_rss_empirical(data.y)
    if eid is EstimatorId.M:
        return var_maceachern(strata, k)
    if eid is EstimatorId.JPS:
        return var_jps_stratified(strata)
    if eid is EstimatorId.F:
        if weights is None:
            raise UsageError("estimator f needs --weights-file")
        return var_frey_feeman(strata, weights)
    if not data.has_x:
        raise InputError("missing required column 'x'")
    return concomitant_variance(data.y, data.x, data.pool, estimator_id=eid)


def cmd_estimate(args) -> int:
    eid = ESTIMATOR_CHOICES[args.estimator]
    weights = read_weights_file(args.weights_file) if args.weights_file else None
    need = ("x",) if eid in (EstimatorId.N, EstimatorId.N_DS) else ()
    try:
        with open(args.input, newline="") as fh:
            data = read_sample_csv(fh, k=args.k, need=need)
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    est = estimate_from_file(data, eid, args.k, weights)
    print(f"estimator: {est.estimator_id.value}")
    print(f"value: {est.value!r}")
    if est.bandwidths is not None:
        print(f"h1: {est.bandwidths[0]!r}")
        print(f"h2: {est.bandwidths[1]!r}")
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rssvar", description=__doc__.split("\n\n")[0])
    p.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def mc_opts(sp):
        sp.add_argument("--reps", type=_positive_int, default=DEFAULT_REPS)
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "md"), default="csv")
        sp.add_argument("--workers", type=_positive_int, default=1, help="worker processes")

    def design_opts(sp):
        sp.add_argument("--scheme", choices=[s.value for s in Scheme], required=True)
        sp.add_argument("--N", type=_positive_int, required=True, help="number of measured units")
        sp.add_argument("--k", type=_positive_int, required=True, help="set size")
        sp.add_argument("--rho", type=float, required=True)
        sp.add_argument("--transform", choices=[t.value for t in TargetTransform], default="identity")

    mc_opts(sub.add_parser("table1", help="relative efficiencies under balanced RSS"))
    t2 = sub.add_parser("table2", help="relative efficiencies under JPS")
    mc_opts(t2)
    t2.add_argument("--weights-file", default=None)

    sc = sub.add_parser("scenario", help="run one Monte Carlo cell")
    design_opts(sc)
    mc_opts(sc)
    sc.add_argument("--weights-file", default=None)

    sa = sub.add_parser("sample", help="draw one sample and write it as CSV")
    design_opts(sa)
    sa.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sa.add_argument("--out", default=None)

    es = sub.add_parser("estimate", help="estimate the variance from a sample file")
    es.add_argument("--input", required=True)
    es.add_argument("--estimator", choices=sorted(ESTIMATOR_CHOICES), required=True)
    es.add_argument("--k", type=_positive_int, default=None)
    es.add_argument("--weights-file", default=None)
    return p


COMMANDS = {
    "table1": cmd_table,
    "table2": cmd_table,
    "scenario": cmd_scenario,
    "sample": cmd_sample,
    "estimate": cmd_estimate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DesignError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, UnsupportedProfileError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InsufficientDataError, BandwidthSelectionError, DegenerateEstimatorError, ScenarioError,
            FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
