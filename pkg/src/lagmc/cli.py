"""Command-line driver for batch experiments.

Exit codes: 0 when every row of every run is ok, 2 when some row failed,
1 on a configuration error.
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .errors import ConfigError
from .experiments import emit_csv, load_config, run

COMMANDS = {
    "solve": ("solve",),
    "flow": ("flow",),
    "gallery": ("counterexample-gallery",),
    "jacobi": ("jacobi-report",),
    "concavity": ("concavity-sweep",),
    "rotate": ("rotation-check",),
    "scaling": ("hessian-scaling", "gradient-scaling"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="lagmc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kinds in COMMANDS.items():
        p = sub.add_parser(name, help=f"run {' / '.join(kinds)} experiments")
        p.add_argument("--config", action="append", required=True, metavar="PATH",
                       help="experiment config (INI); repeat for a batch")
        p.add_argument("--out", default="out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--parallel", action="store_true",
                       help="run the batch in parallel processes (one output directory per run)")
    return parser


def _run_one(args):
    path, outdir, seed = args
    cfg = load_config(path, seed)
    report = run(cfg)
    emit_csv(report, outdir)
    return report.ok, report.summary


def _out_dirs(paths, out):
    if len(paths) == 1:
        return [out]
    stems = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    dirs = []
    for i, s in enumerate(stems):
        dirs.append(os.path.join(out, s if stems.count(s) == 1 else f"{i:03d}_{s}"))
    return dirs


def main(argv=None):
    args = build_parser().parse_args(argv)
    kinds = COMMANDS[args.command]
    # validate every config before running anything
    for path in args.config:
        try:
            cfg = load_config(path, args.seed)
            if cfg.kind not in kinds:
                raise ConfigError("experiment.kind",
                                  f"{cfg.kind!r} does not belong to the {args.command!r} command")
        except ConfigError as exc:
            where = "" if exc.path == str(path) else f"{path}: "
            print(f"config error: {where}{exc}", file=sys.stderr)
            return 1

    jobs = list(zip(args.config, _out_dirs(args.config, args.out), [args.seed] * len(args.config)))
    try:
        if args.parallel and len(jobs) > 1:
            with ProcessPoolExecutor() as pool:
                results = list(pool.map(_run_one, jobs))
        else:
            results = [_run_one(j) for j in jobs]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1

    all_ok = True
    for (path, outdir, _), (ok, summary) in zip(jobs, results):
        all_ok &= ok
        print(f"[{'ok' if ok else 'FAILED'}] {path} -> {outdir}")
        for line in summary:
            print(f"  {line}")
    return 0 if all_ok else 2


if __name__ == "__main__":
    sys.exit(main())
