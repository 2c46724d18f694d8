"""Command line entry point: ``smoothflood {run,sweep,validate,sample-debug}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .adversary import KINDS, AdversarySpec, AdversaryView, build_adversary
from .errors import ConfigError, SmoothFloodError
from .harness import WORKERS_ENV, ExperimentConfig, run_experiment
from .smoothing import model_from_dict


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smoothflood", description="Flooding on smoothed dynamic graphs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    workers = argparse.ArgumentParser(add_help=False)
    workers.add_argument("--workers", type=int, default=None,
                         help=f"worker processes (default: ${WORKERS_ENV} or 1)")

    run = sub.add_parser("run", parents=[workers], help="run one experiment config")
    run.add_argument("config", help="path to a JSON experiment config")
    run.add_argument("--out", help="output directory (overrides output_dir)")

    sweep = sub.add_parser("sweep", parents=[workers],
                           help="run a config with its grid overridden from the command line")
    sweep.add_argument("config")
    sweep.add_argument("--out")
    sweep.add_argument("--n", type=_ints, help="comma-separated vertex counts")
    sweep.add_argument("--k", type=_floats, help="comma-separated k values (k-smoothing)")
    sweep.add_argument("--epsilon", type=_floats,
                       help="comma-separated epsilons (replaces the epsilon of every epsilon model)")
    sweep.add_argument("--trials", type=int)
    sweep.add_argument("--seed", type=int)

    val = sub.add_parser("validate", parents=[workers], help="run the acceptance suites")
    val.add_argument("--suite", action="append", help="suite name (repeatable; default: all)")
    val.add_argument("--out", default="validate-out", help="directory for CSV tables")
    val.add_argument("--seed", type=int, help="replace every preset's base seed")

    dbg = sub.add_parser("sample-debug", help="print one proposed graph as an edge list")
    dbg.add_argument("--adversary", required=True, choices=KINDS)
    dbg.add_argument("--round", type=int, required=True)
    dbg.add_argument("--n", type=int, default=16)
    dbg.add_argument("--c", type=float, help="cassette constant")
    dbg.add_argument("--epsilon", type=float, default=0.5, help="targeted epsilon for the cassette")
    dbg.add_argument("--period", type=int, help="star-recenter period")
    dbg.add_argument("--graph", default="path", help="static graph family")
    return p


def _apply_sweep(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.n:
        cfg["n"] = args.n
    models = list(cfg["models"])
    if args.k:
        models = [m for m in models if m["kind"] != "ksmooth"]
        models += [{"kind": "ksmooth", "k": k} for k in args.k]
    if args.epsilon:
        eps_models = [m for m in models if "epsilon" in m]
        models = [m for m in models if "epsilon" not in m]
        seen = set()
        for m in eps_models:
            for e in args.epsilon:
                new = {**m, "epsilon": e}
                key = tuple(sorted(new.items()))
                if key not in seen:
                    seen.add(key)
                    models.append(new)
    cfg["models"] = models
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _report(result, out):
    print(f"wrote {out}")
    for s in result.summaries.values():
        print(f"{s.cell}: median {s.median:g}  p90 {s.p90:g}  censored {s.censored_fraction:g}")
    for f in result.fits:
        print(f"fit {f.name}: exponent {f.exponent:.3f} +- {f.stderr:.3f} over {len(f.cells)} cells")
    for c in result.comparisons:
        print(f"n={c.n} {c.a}/{c.b}: ratio {c.ratio:.3f} [{c.ci_low:.3f}, {c.ci_high:.3f}]")


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    result = run_experiment(cfg, workers=args.workers)
    _report(result, result.write(args.out))
    return 0


def cmd_sweep(args) -> int:
    base = ExperimentConfig.load(args.config)
    cfg = ExperimentConfig.from_dict(_apply_sweep(base.to_dict(), args))
    result = run_experiment(cfg, workers=args.workers)
    _report(result, result.write(args.out))
    return 0


def cmd_validate(args) -> int:
    from .validation import run_validation

    results = run_validation(args.suite, args.out, args.seed, args.workers, echo=lambda s: print(s, flush=True))
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} suites passed; tables in {args.out}")
    return 1 if failed else 0


def cmd_sample_debug(args) -> int:
    spec = AdversarySpec(kind=args.adversary, n=args.n, c=args.c, period=args.period,
                         graph=args.graph if args.adversary == "static" else None)
    model = None
    if args.adversary == "cassette":
        if spec.c is None:
            raise ConfigError("cassette needs --c")
        model = model_from_dict({"kind": "targeted", "epsilon": args.epsilon})
    adv = build_adversary(spec, model)
    if args.round < 1:
        raise ConfigError("--round must be at least 1")
    if adv.adaptive:
        # replay with no noise: the informed set grows along the proposals
        import numpy as np

        from .engine import flood_mask

        informed = np.zeros(adv.n, dtype=bool)
        informed[adv.source] = True
        prev = adv.initial_graph()
        for i in range(1, args.round + 1):
            g = adv.propose(AdversaryView(i, prev, informed))
            if i < args.round:
                informed = flood_mask(g, informed)
                prev = g
    else:
        g = adv.propose(args.round)
    sys.stdout.write(g.to_edgelist())
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate, "sample-debug": cmd_sample_debug}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SmoothFloodError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
