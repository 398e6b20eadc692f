"""Command-line interface: fetch, featurize, eval, bo, clusters, report.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
Logs go to stderr; data goes to the files named by --out.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .errors import ProbmolError

log = logging.getLogger("probmol")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p, task=True):
    p.add_argument("--data", required=True,
                   help="canonical smiles,target CSV, or a registered dataset name")
    if task:
        p.add_argument("--task", choices=("regression", "binary"),
                       help="task type (inferred for registered datasets)")
    p.add_argument("--seed", type=int, default=0, help="base random seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (output is identical for any value)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def build_parser():
    ap = _Parser(prog="probmol", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fetch", help="place a checksum-verified dataset CSV in a directory")
    p.add_argument("name", help="registered dataset name")
    p.add_argument("--out", required=True, help="destination directory")
    p.add_argument("--source", help="URL or path of a canonical CSV (default: bundled copy)")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("featurize", help="write fingerprints or descriptors as CSV")
    _common(p)
    p.add_argument("--feature", choices=("mfp", "physchem"), default="mfp")
    p.add_argument("--out", required=True, help="output CSV file")

    p = sub.add_parser("eval", help="supervised performance and calibration suite")
    _common(p)
    p.add_argument("--model", choices=("gp", "ngboost"), default="gp")
    p.add_argument("--feature", choices=("mfp", "physchem"), default="mfp")
    p.add_argument("--n-seeds", type=int, default=1, help="number of consecutive seeds from --seed")
    p.add_argument("--boot", type=int, default=1000, help="bootstrap resamples for intervals")
    p.add_argument("--protocol", choices=("random", "cluster"), default="random",
                   help="random/stratified 70/10/20 split or the cluster-split ladder")
    p.add_argument("--out", required=True, help="results directory")

    p = sub.add_parser("bo", help="simulated Bayesian-optimization campaigns")
    _common(p)
    p.add_argument("--model", choices=("gp", "ngboost"), default="gp")
    p.add_argument("--feature", choices=("mfp", "physchem"), default="mfp")
    p.add_argument("--acq", choices=("ucb", "iucb", "greedy", "random"))
    p.add_argument("--beta", type=float)
    p.add_argument("--init-frac", type=float)
    p.add_argument("--batch", type=int, default=5)
    p.add_argument("--budget", type=int, default=300)
    p.add_argument("--runs", type=int, default=30, help="independent runs, seeds --seed .. --seed+runs-1")
    p.add_argument("--out", required=True, help="results directory")

    p = sub.add_parser("clusters", help="cluster ids and the cluster-split ladder manifest")
    _common(p)
    p.add_argument("--out", required=True, help="results directory")

    p = sub.add_parser("report", help="merge result runs into one report bundle")
    p.add_argument("--in", dest="inp", required=True, help="results directory")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _dataset(args):
    from .harness import dataset_info, load_dataset, load_registered
    path = Path(args.data)
    if path.exists():
        if args.task is None:
            raise UsageError("--task is required for a CSV path")
        return load_dataset(path, args.task, path.stem)
    ds = load_registered(args.data)
    if args.task is not None and args.task != ds.task:
        raise UsageError(f"{dataset_info(args.data).name} is a {ds.task} dataset")
    return ds


def _config(args, ds, **kw):
    from .harness import ExperimentConfig
    data_path = str(Path(args.data).resolve()) if Path(args.data).exists() else None
    return ExperimentConfig(dataset=ds.name, task=ds.task, data_path=data_path, **kw)


def cmd_fetch(args):
    from .harness import fetch_dataset
    path = fetch_dataset(args.name, args.out, source=args.source)
    log.info("wrote %s", path)


def cmd_featurize(args):
    from .featurize import DESCRIPTOR_NAMES, Fingerprint
    from .harness import featurize
    ds = _dataset(args)
    X = featurize(ds, args.feature)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if args.feature == "mfp":
            w.writerow(["smiles", "fingerprint"])
            for s, row in zip(ds.smiles, X):
                w.writerow([s, Fingerprint(row.astype(bool)).to_hex()])
        else:
            w.writerow(["smiles", *DESCRIPTOR_NAMES])
            for s, row in zip(ds.smiles, X):
                w.writerow([s, *(repr(float(v)) for v in row)])


def cmd_eval(args):
    from .harness import run_eval_suite, run_generalizability, save_eval, save_ladder
    if args.n_seeds < 1:
        raise UsageError("--n-seeds must be >= 1")
    ds = _dataset(args)
    seeds = tuple(range(args.seed, args.seed + args.n_seeds))
    if args.protocol == "cluster":
        cfg = _config(args, ds, models=(args.model,), features=(args.feature,), seeds=seeds,
                      n_boot=0, protocol="cluster")
        rows, summary = run_generalizability(cfg, args.jobs, dataset=ds)
        run_dir = save_ladder(args.out, cfg, rows, summary, ds)
    else:
        cfg = _config(args, ds, models=(args.model,), features=(args.feature,), seeds=seeds,
                      n_boot=args.boot)
        rows = run_eval_suite(cfg, args.jobs, dataset=ds)
        run_dir = save_eval(args.out, cfg, rows, ds)
    log.info("results in %s", run_dir)


def cmd_bo(args):
    from .bo import AcquisitionSpec
    from .errors import InvalidParams
    from .harness import run_bo_suite, save_bo
    if args.runs < 1 or args.batch < 1 or args.budget < 1:
        raise UsageError("--runs, --batch and --budget must be >= 1")
    if args.init_frac is not None and not 0 < args.init_frac <= 1:
        raise UsageError("--init-frac must be in (0, 1]")
    if args.acq is not None or args.beta is not None:
        try:
            AcquisitionSpec(args.acq or "ucb", 0.25 if args.beta is None else args.beta)
        except InvalidParams as exc:
            raise UsageError(str(exc)) from None
    ds = _dataset(args)
    bo = {"batch": args.batch, "budget": args.budget, "init_frac": args.init_frac}
    if args.acq is not None:
        bo["acq"] = args.acq
    if args.beta is not None:
        bo["beta"] = args.beta
    seeds = tuple(range(args.seed, args.seed + args.runs))
    cfg = _config(args, ds, models=(args.model,), features=(args.feature,), seeds=seeds,
                  n_boot=0, protocol="bo", bo=bo)
    ds, traces, hits = run_bo_suite(cfg, args.jobs, dataset=ds)
    run_dir = save_bo(args.out, cfg, ds, traces, hits)
    log.info("mean hits %.2f; results in %s", sum(hits) / len(hits), run_dir)


def cmd_clusters(args):
    from .harness import build_ladder, save_clusters
    ds = _dataset(args)
    ca, ladder = build_ladder(ds, args.seed)
    cfg = _config(args, ds, seeds=(args.seed,), n_boot=0, protocol="clusters")
    run_dir = save_clusters(args.out, cfg, ds, ca.labels, ladder)
    log.info("%d clusters, %d noise points; results in %s", ca.n_clusters,
             int((ca.labels < 0).sum()), run_dir)


def cmd_report(args):
    from .harness import emit_report
    emit_report(args.inp, args.out)


COMMANDS = {"fetch": cmd_fetch, "featurize": cmd_featurize, "eval": cmd_eval, "bo": cmd_bo,
            "clusters": cmd_clusters, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"probmol: error: {exc}", file=sys.stderr)
        return 1
    except (ProbmolError, OSError, ValueError) as exc:
        print(f"probmol: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
