"""Command-line entry point: ``mlcstore <command> ...``.

Exit status: 0 success, 2 usage error, 3 unreadable or malformed input,
4 weight or parameter outside its domain, 5 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import golden
from .analysis import (census, energy_comparison, sse_sweep, write_census_csv,
                       write_energy_csv, write_sse_csv)
from .codec import (GRANULARITIES, SYSTEMS, DecodeStats, DomainError, EncodedBuffer,
                    FormatError, Scheme, decode_buffer, encode_buffer)
from .memdevice import FaultSpec, default_cost_table, inject_faults, load_cost_table
from .tinynn import ConvergenceError, accuracy_experiment, write_accuracy_csv
from .weightfile import FORMATS, WeightFileError, read_weights, write_weights

log = logging.getLogger("mlcstore")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_DOMAIN = 4
EXIT_VERIFY = 5

_SCHEME_NAMES = {"nochange": Scheme.NO_CHANGE, "rotate": Scheme.ROTATE, "round": Scheme.ROUND}


class UsageError(Exception):
    pass


def parse_schemes(text: str) -> frozenset:
    """``hybrid``/``rotate``/``round``/``unprotected`` or a list like ``nochange,rotate``."""
    text = text.strip().lower()
    if text in SYSTEMS:
        return SYSTEMS[text]
    try:
        chosen = frozenset(_SCHEME_NAMES[t.strip()] for t in text.split(",") if t.strip())
    except KeyError as exc:
        raise UsageError(f"unknown scheme {exc.args[0]!r}") from None
    if Scheme.NO_CHANGE not in chosen:
        raise UsageError("scheme list must include nochange")
    return chosen


def parse_granularities(text: str) -> list[int]:
    try:
        gs = sorted({int(t) for t in text.split(",") if t.strip()})
    except ValueError:
        raise UsageError(f"bad granularity list {text!r}") from None
    bad = [g for g in gs if g not in GRANULARITIES]
    if bad or not gs:
        raise UsageError(f"granularities must be drawn from {GRANULARITIES}")
    return gs


def _granularity(text: str) -> int:
    g = int(text)
    if g not in GRANULARITIES:
        raise argparse.ArgumentTypeError(f"must be one of {GRANULARITIES}")
    return g


def _probability(text: str) -> float:
    p = float(text)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return p


def _csv_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _emit(args, writer, payload):
    fp, close = _csv_out(args.output)
    try:
        writer(payload, fp)
    finally:
        if close:
            fp.close()


def cmd_encode(args):
    words = read_weights(args.input, args.format)
    buf = encode_buffer(words, args.granularity, parse_schemes(args.schemes))
    Path(args.output).write_bytes(buf.to_bytes())
    log.info("encoded %d weights into %d groups", buf.count, len(buf.meta))


def cmd_decode(args):
    buf = EncodedBuffer.from_bytes(Path(args.input).read_bytes())
    stats = DecodeStats()
    write_weights(args.output, decode_buffer(buf, stats), args.format)
    if stats.sign_mismatches:
        log.warning("%d words had disagreeing sign copies", stats.sign_mismatches)


def cmd_inject(args):
    buf = EncodedBuffer.from_bytes(Path(args.input).read_bytes())
    out = inject_faults(buf, FaultSpec(args.p, args.seed), workers=args.workers)
    Path(args.output).write_bytes(out.to_bytes())


def cmd_stats(args):
    words = read_weights(args.input, args.format)
    _emit(args, write_census_csv, census(words, parse_granularities(args.granularities)))


def cmd_energy(args):
    words = read_weights(args.input, args.format)
    costs = load_cost_table(args.costs) if args.costs else default_cost_table()
    rows = energy_comparison(words, parse_granularities(args.granularities), costs)
    _emit(args, write_energy_csv, rows)


def cmd_sse(args):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    _emit(args, write_sse_csv, sse_sweep(args.n, args.seed))


def cmd_accuracy(args):
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    rows = accuracy_experiment(args.p, args.granularity, args.trials, args.seed,
                               workers=args.workers, protect_sign=not args.no_sign_protection)
    _emit(args, write_accuracy_csv, rows)


def cmd_verify(args):
    failed = 0
    for name, ok, detail in golden.run_all():
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    print(f"{'all checks passed' if not failed else f'{failed} check(s) failed'}")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlcstore",
        description="Encode half-precision weights for a 2-bit MLC STT-RAM buffer and "
                    "simulate its energy and soft errors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def weights_input(p):
        p.add_argument("input", help="flat weight file")
        p.add_argument("--format", choices=sorted(FORMATS), default="f16le")

    def csv_output(p):
        p.add_argument("-o", "--output", default="-", help="CSV path (default: stdout)")

    p = sub.add_parser("encode", help="weights -> encoded buffer file")
    weights_input(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-g", "--granularity", type=_granularity, default=1)
    p.add_argument("--schemes", default="hybrid",
                   help="hybrid, rotate, round, unprotected, or a list such as nochange,rotate")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="encoded buffer -> weights")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=sorted(FORMATS), default="f16le")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("inject", help="apply soft errors to an encoded buffer")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--p", type=_probability, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("stats", help="cell pattern census -> census.csv")
    weights_input(p)
    csv_output(p)
    p.add_argument("--granularities", default="1,2,4,8,16")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("energy", help="read/write energy per system -> energy.csv")
    weights_input(p)
    csv_output(p)
    p.add_argument("--granularities", default="1,2,4,8,16")
    p.add_argument("--costs", help="key=value cost table override")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("sse", help="bit-flip SSE per position -> sse.csv")
    csv_output(p)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sse)

    p = sub.add_parser("accuracy", help="MLP accuracy per storage system -> accuracy.csv")
    csv_output(p)
    p.add_argument("--p", type=_probability, default=0.02)
    p.add_argument("-g", "--granularity", type=_granularity, default=1)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-sign-protection", action="store_true",
                   help="ablation: apply the schemes without copying the sign bit")
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser("verify", help="check the pinned worked examples")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args) or EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mlcstore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, OverflowError, ConvergenceError) as exc:
        print(f"mlcstore: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (FormatError, WeightFileError, ValueError, OSError) as exc:
        print(f"mlcstore: cannot read input: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
