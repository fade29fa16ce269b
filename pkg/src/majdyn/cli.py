"""Command line entry point: ``majdyn <command> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from .dynamics import NotStabilizedError
from .graphs import GraphError, GraphFamilySpec, GraphParseError, generate, load_graph, to_edge_list_text
from .oracle import OracleSizeError, exact_distribution, exact_expected_red_volume
from .spectral import DENSE_CAP, SpectralDomainError, SpectralSizeError, mixing_sweep, spectrum
from .walks import WalkContractError, simulate_hitting


def _checkpoint_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers, e.g. 10,100,1000") from None


def _graph_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", help="family spec, e.g. random_regular:100,3,7")
    src.add_argument("--graph", help="edge-list file ('n m' header, then 'u v' lines)")


def _load(args):
    if args.family:
        return generate(GraphFamilySpec.parse(args.family))
    return load_graph(args.graph)


def _emit(text, args, suffix=None):
    if args.out:
        path = Path(args.out)
        if suffix:
            path = path.with_name(path.stem + suffix)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_doc(doc, args, rows=None):
    if args.format == "csv":
        _emit(ex.rows_to_csv(rows if rows is not None else [doc]), args)
    else:
        _emit(ex.dumps_json(doc), args)


def cmd_gen(args):
    g = generate(GraphFamilySpec.parse(args.spec))
    _emit(to_edge_list_text(g), args)
    return 0


def cmd_sim(args):
    cfg = ex.ExperimentConfig(family=args.family, graph_path=args.graph, delta=args.delta,
                              trials=args.trials, seed=args.seed, workers=args.workers,
                              max_steps=args.max_steps, checkpoints=args.checkpoints)
    report = ex.estimate_outcomes(cfg)
    if args.out:
        ex.write_outcome_report(report, args.out, args.format)
    else:
        doc = report.to_dict()
        if args.format == "csv":
            sys.stdout.write(ex.rows_to_csv(ex.per_trial_rows(report.per_trial)))
        else:
            sys.stdout.write(ex.dumps_json(doc))
    return 0


def cmd_spectral(args):
    g = _load(args)
    rep = spectrum(g, cap=args.cap)
    doc = rep.to_dict(full=args.full)
    doc["graph_hash"] = g.content_hash()
    if args.format == "csv":
        rows = [{"index": i, "eigenvalue": float(v)} for i, v in enumerate(rep.eigenvalues)]
        _emit(ex.rows_to_csv(rows), args)
    else:
        _emit(ex.dumps_json(doc), args)
    return 0


def cmd_mix_check(args):
    g = _load(args)
    lam = args.lam if args.lam is not None else spectrum(g, cap=max(g.n, DENSE_CAP)).lam
    res = mixing_sweep(g, lam, args.samples, args.seed)
    doc = {"graph_hash": g.content_hash(), "lambda": lam, "samples": args.samples, **res}
    _emit_doc(doc, args)
    return 0 if res["failed"] == 0 else 1


def cmd_oracle(args):
    g = _load(args)
    if args.expected_red_volume is not None:
        T = args.expected_red_volume
        value = exact_expected_red_volume(g, args.delta, T)
        doc = {"graph_hash": g.content_hash(), "delta": args.delta, "T": T,
               "expected_red_volume": value, "lower_bound": (0.5 + args.delta) * g.m}
    else:
        doc = {"graph_hash": g.content_hash(), "delta": args.delta,
               **exact_distribution(g, args.delta).to_dict()}
    _emit_doc(doc, args)
    return 0


def cmd_walk(args):
    res = simulate_hitting(args.kind, args.d, args.p, args.x, args.trials, args.seed)
    doc = {"kind": res.kind, "d": res.d, "p": res.p, "x": res.x, "trials": args.trials,
           "seed": args.seed, "estimate": res.estimate.to_dict(), "bound": res.bound,
           "unresolved": res.unresolved, "within_bound": res.within_bound}
    if args.format == "csv":
        row = {k: v for k, v in doc.items() if k != "estimate"}
        row.update({f"estimate_{k}": v for k, v in res.estimate.to_dict().items()})
        _emit(ex.rows_to_csv([row]), args)
    else:
        _emit(ex.dumps_json(doc), args)
    return 0


def cmd_suite(args):
    kwargs = {"seed": args.seed, "workers": args.workers}
    if args.trials is not None:
        kwargs["trials"] = args.trials
    if args.delta is not None:
        kwargs["delta"] = args.delta
    report = ex.SUITES[args.name](**kwargs)
    for check in report.checks:
        print(check.line(), file=sys.stderr)
    if args.format == "csv":
        _emit(ex.rows_to_csv(ex.per_trial_rows(report.per_trial)), args)
    else:
        _emit(ex.dumps_json(report.to_dict()), args)
    return 0 if report.passed else 1


def _global_args(p, defaults=True):
    # subcommands repeat the global flags with suppressed defaults, so they may
    # appear on either side of the subcommand name
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    p.add_argument("--workers", type=int, default=d(1), help="worker processes for trials")
    p.add_argument("--out", default=d(None), help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=d("json"))
    p.add_argument("--json", dest="format", action="store_const", const="json", default=d("json"),
                   help="same as --format json")


def build_parser():
    parser = argparse.ArgumentParser(prog="majdyn", description="Asynchronous majority dynamics toolkit")
    _global_args(parser)
    common = argparse.ArgumentParser(add_help=False)
    _global_args(common, defaults=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add("gen", help="generate a graph and print its edge list")
    p.add_argument("spec", help="family spec, e.g. cycle:10 or random_regular:100,3,7")
    p.set_defaults(func=cmd_gen)

    p = add("sim", help="Monte Carlo outcome estimates")
    _graph_args(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--checkpoints", type=_checkpoint_list, default=(),
                   help="comma-separated steps at which to record observers")
    p.set_defaults(func=cmd_sim)

    p = add("spectral", help="spectrum of the degree-normalized adjacency matrix")
    _graph_args(p)
    p.add_argument("--cap", type=int, default=DENSE_CAP, help="largest n for the dense solver")
    p.add_argument("--full", action="store_true", help="include every eigenvalue")
    p.set_defaults(func=cmd_spectral)

    p = add("mix-check", help="check the mixing inequality on random subset pairs")
    _graph_args(p)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--lam", type=float, default=None, help="lambda to test (default: computed)")
    p.set_defaults(func=cmd_mix_check)

    p = add("oracle", help="exact outcome distribution on a tiny graph")
    _graph_args(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--expected-red-volume", type=int, default=None, metavar="T",
                   help="instead report the exact expected red volume after T steps")
    p.set_defaults(func=cmd_oracle)

    p = add("walk", help="hitting probability of a biased bounded walk")
    p.add_argument("--kind", choices=("pm1", "lazy"), default="lazy")
    p.add_argument("-d", "--d", type=int, required=True, help="step bound")
    p.add_argument("-p", "--p", type=float, required=True, help="drift")
    p.add_argument("-x", "--x", type=float, required=True, help="barrier")
    p.add_argument("--trials", type=int, default=100_000)
    p.set_defaults(func=cmd_walk)

    p = add("suite", help="run a reproduction suite; exit 1 if any check fails")
    p.add_argument("name", choices=sorted(ex.SUITES))
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except (GraphError, GraphParseError, OracleSizeError, SpectralDomainError, SpectralSizeError,
            WalkContractError, NotStabilizedError, ValueError) as exc:
        print(f"majdyn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
