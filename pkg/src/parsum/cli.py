"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 numerical failure (including a
degenerate conditioning event or oracle), 3 control-limit root not bracketed.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import control, experiments, oracle, quality, reliability
from .convolve import Backend
from .densities import DEFAULT_EPS, Monomial, parse_distribution
from .errors import (
    ConfigurationError, DomainError, NumericalFailure, OracleDegenerateError, RootNotBracketed,
)
from .records import ResultRecord, fmt, render, timed, to_csv, to_json
from .sum_chain import (
    Tail, cond_expect_pair, cond_expect_single, cond_expect_total, cond_prob, distribution,
    prob_tail, tail_interval,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_BRACKET = 0, 1, 2, 3
Z_LIMIT = 4.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    if not hi > lo:
        raise argparse.ArgumentTypeError(f"empty window {text!r}")
    return lo, hi


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _common(p: argparse.ArgumentParser, step: float | None = 1e-3, backend: str = "fft") -> None:
    p.add_argument("--backend", choices=[b.value for b in Backend], default=backend)
    p.add_argument("--step", type=_positive, default=step, help="grid step")
    p.add_argument("--eps", type=_positive, default=DEFAULT_EPS, help="truncation tail mass")
    p.add_argument("--window", type=_window, default=None, help="explicit factor window LO,HI")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--render", action="store_true", help="emit a rounded text rendering")
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def _direction(args) -> Tail:
    return Tail.LE if getattr(args, "le", False) else Tail.GE


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="parsum", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sumdist", help="tail probabilities and conditional moments of a sum")
    _common(s)
    s.add_argument("--dist", required=True, help="e.g. exp:rate=1, weibull:shape=2,scale=1")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--tail", type=float, help="report P(T >= tau) (or <= with --le)")
    s.add_argument("--cond", "--cond-tail", dest="cond", type=float,
                   help="condition on T >= tau (or <= with --le)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--ge", action="store_true", help="upper tails (default)")
    g.add_argument("--le", action="store_true", help="lower tails")
    s.add_argument("--expect", choices=["x1", "x1x2", "total"], help="conditional expectation")

    t = sub.add_parser("table", help="reproduce one of the reference tables")
    _common(t, step=None)
    t.add_argument("which", choices=["table1", "table2", "table3", "table4"])
    t.add_argument("--slow", action="store_true", help="include long-running configurations")
    t.add_argument("--alpha", type=float, action="append", help="table4: alpha (repeatable)")
    t.add_argument("--N", type=int, action="append", help="table4: horizon (repeatable)")

    b = sub.add_parser("bench", help="time the direct and FFT chains")
    _common(b, step=None)
    b.add_argument("--steps", type=_positive, nargs="+", default=None)
    b.add_argument("--slow", action="store_true", help="include step 1e-4")

    v = sub.add_parser("verify", help="compare engine values with Monte Carlo")
    _common(v)
    v.add_argument("quantity", choices=["table2", "table3", "table4", "tail"])
    v.add_argument("--samples", type=int, default=10_000_000)
    v.add_argument("--seed", type=int, default=oracle.DEFAULT_SEED)
    v.add_argument("--batch", type=int, default=1_000_000)
    v.add_argument("--dist", default="exp:rate=1")
    v.add_argument("--n", type=int, default=10)
    v.add_argument("--tau", type=float, default=0.0)
    v.add_argument("--le", action="store_true")
    v.add_argument("--perturb", type=float, default=0.0,
                   help="add this to every engine value (detector check)")

    r = sub.add_parser("reliability", help="machine of successively deployed components")
    _common(r)
    r.add_argument("--dist", default="weibull:shape=2,scale=1")
    r.add_argument("--n", type=int, default=10)
    r.add_argument("--t", type=float, help="survival P(T >= t)")
    r.add_argument("--tau", type=float, help="observation time")
    r.add_argument("--observed", choices=["operating", "failed"], default="operating")
    r.add_argument("--expected", action="store_true", help="E[T | T >= tau]")
    r.add_argument("--variance", action="store_true", help="Var[T | T >= tau]")
    r.add_argument("--count", type=int, help="P(X_1+..+X_i >= tau | T >= tau) for this i")

    q = sub.add_parser("quality", help="satisfactory items given the batch total")
    _common(q)
    q.add_argument("--dist", default="laplace:rate=1")
    q.add_argument("--n", type=int, default=10)
    q.add_argument("--c", type=float, default=1.0)
    q.add_argument("--total", type=float, action="append", help="exact total (repeatable)")
    q.add_argument("--bound", type=float, help="bounded total T >= t (or <= with --le)")
    q.add_argument("--le", action="store_true")

    c = sub.add_parser("control", help="control limit of the two-exceedance rule")
    _common(c, step=control.DEFAULT_STEP, backend="direct")
    c.add_argument("--dist", default="exp:rate=1")
    c.add_argument("--N", type=int, default=8)
    c.add_argument("--alpha", type=float, default=0.10)
    c.add_argument("--c", type=float, help="only evaluate P(no stop) at this limit")
    c.add_argument("--u-cap", type=float, default=None)
    return ap


# -- commands ----------------------------------------------------------------------

def _opts(args) -> dict:
    return dict(step=args.step, backend=Backend.parse(args.backend), eps=args.eps, window=args.window)


def _rec(quantity, label, fn, args, **extra) -> ResultRecord:
    with timed() as t:
        v = fn()
    return ResultRecord(quantity, label, float(v), args.step, args.backend, t["seconds"],
                        args.window, extra)


def cmd_sumdist(args) -> list[ResultRecord]:
    model = parse_distribution(args.dist)
    opts = _opts(args)
    direction = _direction(args)
    d = distribution(model, args.n, **opts)
    out = []
    sym = ">=" if direction is Tail.GE else "<="
    if args.tail is not None and args.cond is None:
        out.append(_rec("sumdist", f"P(T{sym}{args.tail:g})",
                        lambda: prob_tail(d, args.tail, direction), args))
    if args.tail is not None and args.cond is not None:
        out.append(_rec("sumdist", f"P(T{sym}{args.tail:g}|T{sym}{args.cond:g})",
                        lambda: cond_prob(d, tail_interval(args.tail, direction),
                                          tail_interval(args.cond, direction)), args))
    if args.expect:
        tau = args.cond
        if tau is None:
            tau, direction = d.density.grid.origin, Tail.GE
        x = Monomial(1.0)
        fn = {
            "x1": lambda: cond_expect_single(model, x, tau, direction, n=args.n, **opts),
            "x1x2": lambda: cond_expect_pair(model, x, x, tau, direction, n=args.n, **opts),
            "total": lambda: cond_expect_total(model, tau, direction, n=args.n, **opts),
        }[args.expect]
        name = {"x1": "E[X1", "x1x2": "E[X1X2", "total": "E[T"}[args.expect]
        cond = f"|T{sym}{tau:g}]" if args.cond is not None else "]"
        out.append(_rec("sumdist", name + cond, fn, args))
    if not out:
        raise UsageError("nothing to compute: give --tail and/or --expect")
    return out


def cmd_table(args) -> list[ResultRecord]:
    if args.which == "table1":
        steps = (args.step,) if args.step else (0.01, 0.001, 0.0001)
        backends = ("direct", "fft")
        return experiments.table1(steps, slow=args.slow, backends=backends)
    if args.which == "table2":
        return experiments.table2(args.step or 1e-3, args.backend)
    if args.which == "table3":
        return experiments.table3(args.step or 1e-3, args.backend)
    alphas = tuple(args.alpha) if args.alpha else (0.10, 0.05)
    horizons = tuple(args.N) if args.N else ((8, 10, 12) if args.slow else (8,))
    return experiments.table4(alphas, horizons, args.step or control.DEFAULT_STEP)


def cmd_bench(args) -> tuple[list[ResultRecord], bool]:
    """Fails (exit 2) when FFT is slower than direct on a grid of at least 1e4 nodes."""
    steps = tuple(args.steps) if args.steps else ((0.01, 0.001, 0.0001) if args.slow else (0.01, 0.001))
    records = experiments.bench(steps)
    ok = all(r.extra["fft_not_slower"] for r in records
             if r.label.startswith("ratio") and r.extra["nodes"] >= experiments.BENCH_MIN_NODES)
    return records, ok


def cmd_verify(args) -> tuple[list[ResultRecord], bool]:
    cfg = oracle.McConfig(args.samples, args.seed, args.batch)
    if args.quantity == "table2":
        comps = experiments.verify_table2(cfg, args.step)
    elif args.quantity == "table3":
        comps = experiments.verify_table3(cfg, args.step)
    elif args.quantity == "table4":
        comps = experiments.verify_table4(cfg)
    else:
        comps = experiments.verify_tail(parse_distribution(args.dist), args.n, args.tau,
                                        _direction(args), cfg, **_opts(args))
    out, ok = [], True
    for c in comps:
        c.engine += args.perturb
        z = c.z
        ok &= abs(z) <= Z_LIMIT
        out.append(ResultRecord("verify", c.quantity, c.engine, args.step, args.backend, 0.0,
                                extra={"engine_value": c.engine, "mc_value": c.mc, "mc_se": c.se,
                                       "z_score": z}))
    return out, ok


def cmd_reliability(args) -> list[ResultRecord]:
    m = reliability.MachineSpec.iid(parse_distribution(args.dist), args.n, step=args.step,
                                    backend=args.backend, eps=args.eps)
    out = []
    if args.t is not None and args.tau is None:
        out.append(_rec("reliability", f"P(T>={args.t:g})", lambda: reliability.survival(m, args.t), args))
    if args.t is not None and args.tau is not None:
        out.append(_rec("reliability", f"P(T>={args.t:g}|{args.observed}@{args.tau:g})",
                        lambda: reliability.cond_survival(m, args.t, args.tau, args.observed), args))
    tau = args.tau if args.tau is not None else 0.0
    if args.expected:
        out.append(_rec("reliability", f"E[T|T>={tau:g}]",
                        lambda: reliability.cond_expected_failure_time(m, tau), args))
    if args.variance:
        out.append(_rec("reliability", f"Var[T|T>={tau:g}]",
                        lambda: reliability.cond_failure_time_variance(m, tau), args))
    if args.count is not None:
        out.append(_rec("reliability", f"P(X1+..+X{args.count}>={tau:g}|T>={tau:g})",
                        lambda: reliability.failed_count_tail(m, args.count, tau), args))
    if not out:
        raise UsageError("nothing to compute: give --t, --expected, --variance or --count")
    return out


def quality_wide_csv(records: Sequence[ResultRecord]) -> str:
    """Rows i = 0..n, one column per exact total, then grid and backend."""
    totals = list(dict.fromkeys(r.extra["T"] for r in records))
    n = max(r.extra["i"] for r in records)
    cell = {(r.extra["i"], r.extra["T"]): r.value for r in records}
    lines = [",".join(["i"] + [f"T={t:g}" for t in totals] + ["grid_step", "backend"])]
    for i in range(n + 1):
        lines.append(",".join([str(i)] + [fmt(cell[(i, t)]) for t in totals]
                              + [fmt(records[0].grid_step), records[0].backend]))
    return "\n".join(lines) + "\n"


def cmd_quality(args) -> list[ResultRecord]:
    spec = quality.BatchSpec(args.n, args.c, parse_distribution(args.dist), step=args.step,
                             backend=args.backend, eps=args.eps)
    out = []
    for total_value in args.total or []:
        with timed() as t:
            probs = quality.count_distribution_exact_total(spec, total_value)
        out += [ResultRecord("quality", f"i={i},T={total_value:g}", float(p), args.step,
                             args.backend, t["seconds"] / len(probs), extra={"i": i, "T": total_value})
                for i, p in enumerate(probs)]
    if args.bound is not None:
        direction = _direction(args)
        sym = ">=" if direction is Tail.GE else "<="
        for i in range(args.n + 1):
            out.append(_rec("quality", f"i={i},T{sym}{args.bound:g}",
                            lambda i=i: quality.count_prob_bounded_total(spec, i, args.bound, direction),
                            args))
    if not out:
        raise UsageError("nothing to compute: give --total and/or --bound")
    return out


def cmd_control(args) -> list[ResultRecord]:
    if args.backend != "direct":
        raise ConfigurationError(
            "the control recursion has (u, v)-dependent limits; pass --backend direct")
    p = control.ControlProblem(args.N, args.alpha, parse_distribution(args.dist), step=args.step,
                               u_cap=args.u_cap, eps=args.eps)
    if args.c is not None:
        return [_rec("control", f"P(no stop|c={args.c:g},N={args.N})",
                     lambda: control.no_stop_probability(p, args.c), args)]
    with timed() as t:
        res = control.solve_control_limit(p)
    return [ResultRecord("control", f"c(alpha={args.alpha:g},N={args.N})", res.c, args.step,
                         "direct", t["seconds"], extra={"alpha": args.alpha, "N": args.N,
                                                         "probability_at_c": res.probability})]


def _emit(records: Sequence[ResultRecord], args) -> None:
    extras: list[str] = []
    for r in records:
        for k in r.extra:
            if k not in extras:
                extras.append(k)
    if args.json:
        text = to_json(records)
    elif args.render:
        text = render(records, 7)
    elif args.command == "quality" and args.bound is None:
        text = quality_wide_csv(records)
    else:
        text = to_csv(records, tuple(extras))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ok = True
        if args.command == "verify":
            records, ok = cmd_verify(args)
        elif args.command == "bench":
            records, ok = cmd_bench(args)
        else:
            handler = {"sumdist": cmd_sumdist, "table": cmd_table,
                       "reliability": cmd_reliability, "quality": cmd_quality,
                       "control": cmd_control}[args.command]
            records = handler(args)
        _emit(records, args)
        return EXIT_OK if ok else EXIT_NUMERIC
    except RootNotBracketed as exc:
        print(f"parsum: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (NumericalFailure, OracleDegenerateError, DomainError) as exc:
        print(f"parsum: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConfigurationError) as exc:
        print(f"parsum: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
