"""Command-line interface.

    legendre decompose -c 50 -n -d 100 -b 1 -i test8.csv
    legendre -c 50 -n -d 100 -b 1 -i test8.csv          # same, subcommand implied
    legendre cluster DIR --kind unfolded-p -c 25
    legendre validate
    legendre mnist-to-tensors --images t10k-images-idx3-ubyte.gz --labels t10k-labels-idx1-ubyte.gz --out DIR

Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 numerical failure.
"""
import argparse
import json
import logging
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .clustering import FeatureKind
from .datasets import load_labelled, mnist_to_tensors, read_idx
from .engine import InitScheme, Method, SampleSpace, SolverOptions, decompose
from .errors import InputError, NumericError, ParseError
from .experiments import cluster_results, decompose_many, write_contingency_csv, write_metrics_csv
from .poset import BasisMode, write_basis_csv
from .tensor import read_tensor_csv, write_tensor_csv
from .validation import run_validate

EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 1, 2, 3
COMMANDS = ("decompose", "cluster", "validate", "mnist-to-tensors")

log = logging.getLogger("legendre")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _solver_args(p):
    p.add_argument("-c", "--core-size", type=int, required=True, help="basis positions per last-axis slice")
    p.add_argument("-n", "--natural", action="store_true", help="natural gradient (default: gradient descent)")
    p.add_argument("-b", "--basis", type=int, choices=(1, 2, 3), default=1,
                   help="1 random, 2 partial order (smallest nonzero), 3 stride")
    p.add_argument("--init", choices=[s.value for s in InitScheme], default="zero")
    p.add_argument("--seed", type=int, default=0, help="seed of the basis draw and random init")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--repeat-max", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.5, help="gradient-descent learning rate")
    p.add_argument("--ridge", type=float, default=1e-9)
    p.add_argument("--sample-space", choices=[s.value for s in SampleSpace], default="support")
    p.add_argument("--no-line-search", action="store_true", help="take raw natural-gradient steps")


def build_parser():
    parser = _Parser(prog="legendre", description="Legendre decomposition of non-negative tensors.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("decompose", help="decompose one tensor file")
    _solver_args(p)
    p.add_argument("-i", "--input", required=True, help="tensor CSV file")
    p.add_argument("-d", "--depth", type=int, help="expected last extent of the input")
    p.add_argument("--out", default=None, help="directory for report.json and reconstructed.csv")
    p.add_argument("--no-time", action="store_true", help="omit running time for byte-stable output")

    p = sub.add_parser("cluster", help="cluster decomposition features of labelled tensors")
    _solver_args(p)
    p.add_argument("directory", help="directory of test<digit>_<n>.csv files")
    p.add_argument("--kind", action="append", choices=[k.value for k in FeatureKind],
                   help="feature kind (repeatable; default all)")
    p.add_argument("-k", "--clusters", type=int, default=10)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("validate", help="run the built-in property checks")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("mnist-to-tensors", help="convert MNIST IDX files into tensor CSVs")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--layout", choices=("stack", "single", "batch"), default="stack")
    p.add_argument("--count", type=int, default=100, help="images per digit")
    p.add_argument("--batch-size", type=int, default=10)
    return parser


def _options(args):
    return SolverOptions(
        method=Method.NATURAL_GRADIENT if args.natural else Method.GRADIENT_DESCENT,
        learning_rate=args.lr,
        epsilon=args.epsilon,
        repeat_max=args.repeat_max,
        ridge=args.ridge,
        init=args.init,
        init_seed=args.seed,
        sample_space=args.sample_space,
        line_search=not args.no_line_search,
    )


def run_decompose(args):
    x = read_tensor_csv(args.input)
    if args.depth is not None and args.depth != x.shape[-1]:
        raise UsageError(f"-d {args.depth} does not match last extent {x.shape[-1]} of {args.input}")
    result = decompose(x, args.core_size, BasisMode(args.basis), _options(args), basis_seed=args.seed)
    report = result.report(include_time=not args.no_time)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        write_tensor_csv(out / "reconstructed.csv", result.reconstructed)
        write_basis_csv(out / "basis.csv", result.basis)
    cols = ["N_par", "N_iter"] + ([] if args.no_time else ["running_time"]) + ["RMSE"]
    row = [str(result.n_par), str(result.iterations)]
    if not args.no_time:
        row.append(f"{result.elapsed:.6g}")
    row.append(f"{result.rmse_value:.6g}")
    print("\t".join(cols))
    print("\t".join(row))
    if not result.converged:
        log.warning("stopped without converging (%s), residual %.3e", result.stop_reason, result.residual)
    return result


def run_cluster(args):
    labels, tensors = load_labelled(args.directory)
    if len({t.shape for t in tensors}) != 1:
        raise ParseError("tensors in the batch have different shapes")
    results = decompose_many(tensors, args.core_size, BasisMode(args.basis), _options(args),
                             basis_seed=args.seed, workers=args.workers)
    kinds = args.kind or [k.value for k in FeatureKind]
    reports = cluster_results(results, labels, kinds, k=args.clusters, seed=args.seed,
                              restarts=args.restarts, standardize=args.standardize)
    digits = sorted(set(labels))
    print("kind\tAMI\tARI")
    for r in reports:
        print(f"{r.kind.value}\t{r.ami:.5f}\t{r.ari:.5f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(out / "metrics.csv", reports)
        for r in reports:
            name = "contingency.csv" if len(reports) == 1 else f"contingency_{r.kind.value}.csv"
            write_contingency_csv(out / name, r, digits)
    return reports


def run_mnist(args):
    images = read_idx(args.images)
    labels = read_idx(args.labels)
    if len(images) != len(labels) or images.ndim != 3:
        raise ParseError("image and label files do not match")
    paths = mnist_to_tensors(images, labels, args.out, args.layout, args.count, args.batch_size)
    print(f"wrote {len(paths)} tensors to {args.out}")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help", "--version", "-v", "--verbose"):
        argv.insert(0, "decompose")
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "decompose":
            run_decompose(args)
        elif args.command == "cluster":
            run_cluster(args)
        elif args.command == "validate":
            return 0 if run_validate(seed=args.seed) else EXIT_NUMERIC
        else:
            run_mnist(args)
    except UsageError as exc:
        print(f"legendre: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, InputError) as exc:
        print(f"legendre: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"legendre: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
