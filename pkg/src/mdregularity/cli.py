"""Command-line front end: ``mdreg <subcommand> ...``.

Exit codes: 0 success, 2 negative verdict (irregular, not-pattern, bound
unsatisfied), 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .counting import HYPOTHESES, count_structured, unstructured_counts, verify_counting
from .partition import BlockPartition, is_eps_regular_partition
from .patterns import (
    build_counterexample,
    check_pattern,
    check_pattern_relative,
    hadamard_regular_matrix,
    random_tensor,
)
from .rational import as_fraction, fmt
from .regularity import MODES, check_regularity
from .szemeredi import DecompositionConfig, decompose
from .tensor import Tensor, TensorError, volume

DEFAULT_SEED = 20240601
EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


class CliError(Exception):
    pass


def _rational(text: str):
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"expected a rational like 1/4, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not out or any(x < 1 for x in out):
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return out


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _load_tensor(path: str) -> Tensor:
    try:
        return Tensor.load(path)
    except FileNotFoundError as exc:
        raise CliError(f"no such file: {path}") from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"malformed matrix file {path}: {exc}") from exc


def _load_partition(path: str) -> BlockPartition:
    try:
        return BlockPartition.load(path)
    except FileNotFoundError as exc:
        raise CliError(f"no such file: {path}") from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"malformed partition file {path}: {exc}") from exc


def _config(args: argparse.Namespace) -> dict:
    skip = {"func", "command"}
    out = {"command": args.command}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        out[key] = fmt(value) if hasattr(value, "denominator") and not isinstance(value, int) else value
    return out


def _emit(args: argparse.Namespace, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    if args.kind == "random":
        if args.dims is None:
            raise CliError("gen random needs --dims")
        symbols = args.alphabet.split(",")
        dens = args.densities.split(",") if args.densities else [f"1/{len(symbols)}"] * len(symbols)
        t = random_tensor(args.dims, symbols, [as_fraction(x) for x in dens], seed=args.seed)
    elif args.kind == "hadamard":
        t, _ = hadamard_regular_matrix(args.k, args.variant)
    else:
        h, _ = hadamard_regular_matrix(args.k, args.variant)
        t = build_counterexample(h).matrix
    if args.out:
        t.save(args.out)
    else:
        print(t.dumps())
    return EXIT_OK


def cmd_check_regularity(args: argparse.Namespace) -> int:
    t = _load_tensor(args.matrix)
    if args.partition:
        p = _load_partition(args.partition)
        if p.dims != t.dims:
            raise CliError("partition dimensions do not match the matrix")
        verdict = is_eps_regular_partition(t, p, args.eps, args.mode, args.budget, args.seed)
        _emit(args, {"config": _config(args), "partition": verdict.to_json()})
        return EXIT_OK if verdict.regular else EXIT_NEGATIVE
    cert = check_regularity(t, args.eps, args.mode, budget=args.budget, seed=args.seed)
    _emit(args, {"config": _config(args), "certificate": cert.to_json()})
    return EXIT_OK if cert.regular else EXIT_NEGATIVE


def cmd_decompose(args: argparse.Namespace) -> int:
    t = _load_tensor(args.matrix)
    cfg = DecompositionConfig(
        args.eps, initial_order=args.initial_order, mode=args.mode, budget=args.budget, seed=args.seed,
        max_rounds=args.max_rounds,
    )
    result = decompose(t, cfg)
    lines = [json.dumps({"config": _config(args)})]
    lines += [json.dumps(r.to_json()) for r in result.trace]
    lines.append(json.dumps({"summary": result.summary(), "partition": result.partition.partition.to_json()}))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.partition_out:
        result.partition.partition.save(args.partition_out)
    return EXIT_OK


def cmd_count(args: argparse.Namespace) -> int:
    a, c = _load_tensor(args.matrix), _load_tensor(args.target)
    doc: dict = {"config": _config(args)}
    if args.partition:
        doc["structured_count"] = count_structured(a, _load_partition(args.partition), c)
        doc["count"] = doc["structured_count"]
    else:
        u = unstructured_counts(a, c)
        doc["count"] = u.distinct
        doc["unstructured"] = u.to_json()
    _emit(args, doc)
    return EXIT_OK


def cmd_verify_bound(args: argparse.Namespace) -> int:
    a, c, p = _load_tensor(args.matrix), _load_tensor(args.target), _load_partition(args.partition)
    report = verify_counting(
        a, p, c, args.delta, hypothesis=args.hypothesis, eps=args.eps, mode=args.mode, budget=args.budget,
        seed=args.seed, probes=args.probes,
    )
    _emit(args, {"config": _config(args), "report": report.to_json()})
    return EXIT_OK if report.satisfied else EXIT_NEGATIVE


def cmd_check_pattern(args: argparse.Namespace) -> int:
    t = _load_tensor(args.matrix)
    mode = args.mode or "exhaustive"
    if args.relative:
        host = _load_tensor(args.relative_matrix) if args.relative_matrix else t
        p = _load_partition(args.relative)
        cert = check_pattern_relative(t, args.eps, (host, p), mode, probes=args.probes, seed=args.seed)
    else:
        cert = check_pattern(t, args.eps, mode, probes=args.probes, seed=args.seed)
    _emit(args, {"config": _config(args), "certificate": cert.to_json()})
    return EXIT_NEGATIVE if cert.verdict == "not-pattern" else EXIT_OK


def cmd_counterexample(args: argparse.Namespace) -> int:
    h, _ = hadamard_regular_matrix(args.k, args.variant)
    ce = build_counterexample(h)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ce.matrix.save(out / "A.json")
    ce.partition.save(out / "partition.json")
    ce.target.save(out / "U.json")
    ce.seed_matrix.save(out / "H.json")
    densities = {}
    for blk in ce.partition.blocks:
        beta = ",".join(str(ax[0] // h.dims[0]) for ax in blk.ref.axes)
        densities[beta] = fmt(as_fraction(int(ce.matrix.array[blk.ref.index()].sum())) / volume(blk.ref))
    _emit(args, {
        "config": _config(args),
        "files": {k: str(out / f) for k, f in
                  (("matrix", "A.json"), ("partition", "partition.json"), ("target", "U.json"), ("seed", "H.json"))},
        "order": ce.matrix.dims[0],
        "block_densities": densities,
    })
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--threads", type=_positive, default=1, help="parallelism bound; results do not depend on it")
    common.add_argument("--out", help="write the JSON result here instead of stdout")

    checks = argparse.ArgumentParser(add_help=False)
    checks.add_argument("--eps", type=_rational, default=as_fraction("1/4"), help='rational such as "1/4"')
    checks.add_argument("--budget", type=_positive, default=None, help="probe budget for sampled mode")

    parser = argparse.ArgumentParser(prog="mdreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a matrix")
    g.add_argument("kind", choices=["random", "hadamard", "counterexample"])
    g.add_argument("--dims", type=_int_list)
    g.add_argument("--alphabet", default="0,1")
    g.add_argument("--densities", help='comma-separated rationals, e.g. "1/2,1/2"')
    g.add_argument("--k", type=_positive, default=2, help="Hadamard exponent (order 2^k)")
    g.add_argument("--variant", choices=["raw", "balanced"], default="balanced")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("check-regularity", parents=[common, checks], help="eps-regularity of a matrix or partition")
    r.add_argument("--matrix", required=True)
    r.add_argument("--partition")
    r.add_argument("--mode", choices=MODES, default="exhaustive-intervals")
    r.set_defaults(func=cmd_check_regularity)

    dcm = sub.add_parser("decompose", parents=[common, checks], help="energy-increment regularity decomposition")
    dcm.add_argument("--matrix", required=True)
    dcm.add_argument("--mode", choices=MODES, default="exhaustive-intervals")
    dcm.add_argument("--initial-order", type=_positive)
    dcm.add_argument("--max-rounds", type=_positive)
    dcm.add_argument("--partition-out", help="also save the final partition here")
    dcm.set_defaults(func=cmd_decompose)

    c = sub.add_parser("count", parents=[common], help="count occurrences of a target submatrix")
    c.add_argument("--matrix", required=True)
    c.add_argument("--target", required=True)
    c.add_argument("--partition", help="grid partition: count structured occurrences")
    c.set_defaults(func=cmd_count)

    v = sub.add_parser("verify-bound", parents=[common, checks], help="check the counting lower bound")
    v.add_argument("--matrix", required=True)
    v.add_argument("--partition", required=True)
    v.add_argument("--target", required=True)
    v.add_argument("--delta", type=_rational, required=True)
    v.add_argument("--hypothesis", choices=HYPOTHESES, default="regular")
    v.add_argument("--mode", default=None, help="regularity or pattern mode for the block hypotheses")
    v.add_argument("--probes", type=_positive, default=20)
    v.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("check-pattern", parents=[common, checks], help="eps-regular pattern certification")
    p.add_argument("--matrix", required=True)
    p.add_argument("--mode", choices=["exhaustive", "sampled"])
    p.add_argument("--probes", type=_positive, default=50)
    p.add_argument("--relative", metavar="PARTITION", help="only use probes found in this partition's blocks")
    p.add_argument("--relative-matrix", help="host matrix of --relative (defaults to --matrix)")
    p.set_defaults(func=cmd_check_pattern)

    ce = sub.add_parser("counterexample", parents=[common], help="write the 3-dim counterexample files")
    ce.add_argument("--k", type=_positive, default=2)
    ce.add_argument("--variant", choices=["raw", "balanced"], default="balanced")
    ce.add_argument("--out-dir", default=".")
    ce.set_defaults(func=cmd_counterexample)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (CliError, TensorError, ValueError, RuntimeError, OSError) as exc:
        print(f"mdreg: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
