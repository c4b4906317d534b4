"""``uqp`` command line: compile, run, disasm and bench.

Exit status is 0 on success, 1 for user or input errors and 2 for internal faults.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bench, isa, qcp, qir
from .atoms import AtomPipelineError
from .lowering import JobOptions, LoweringError, lower

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2

TARGETS = {"sc": isa.Target.SUPERCONDUCTING, "na": isa.Target.NEUTRAL_ATOM}

# errors caused by the input rather than by this program
USER_ERRORS = (qir.QirError, isa.IsaError, LoweringError, qcp.QcpError, AtomPipelineError,
               OSError, ValueError)


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        # usage mistakes are user errors, not the argparse default of 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _fail(msg: str) -> None:
    print(f"uqp: error: {msg}", file=sys.stderr)


def _describe(exc: Exception, path: str | None = None) -> str:
    name = type(exc).__name__
    if isinstance(exc, qir.QirError) and exc.line is not None:
        loc = f"{path}:{exc.line}" if path else f"line {exc.line}"
        if exc.column is not None:
            loc += f":{exc.column}"
        return f"{loc}: {name}: {exc.message}"
    return f"{path + ': ' if path else ''}{name}: {exc}"


def cmd_compile(args: argparse.Namespace) -> int:
    src = Path(args.input)
    module = qir.parse_qir(src.read_text())
    kernel = qir.validate(module)
    opts = JobOptions(TARGETS[args.target], args.shots, args.seed)
    program, report = lower(kernel, opts, track_memory=True)
    out = Path(args.output) if args.output else src.with_suffix(".uqpb")
    image = isa.assemble(program)
    out.write_bytes(image)
    print(f"{out}: {report.word_count} words, {report.angle_count} angles, "
          f"{len(image)} bytes, peak {report.peak_bytes} B, "
          f"{report.wall_time * 1e6:.1f} us, target {args.target}, shots {args.shots}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    program = qcp.read_program(args.input)
    instance = qcp.load(program)
    report = qcp.run(instance, args.seed, shots=args.shots, fast=not args.step)
    if args.format == "json":
        text = report.to_json()
    else:
        text = report.histogram_csv()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if args.trace:
        Path(args.trace).write_text(report.trace_csv())
    return EXIT_OK


def cmd_disasm(args: argparse.Namespace) -> int:
    listing, _ = isa.disassemble(Path(args.input).read_bytes())
    print(listing)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        lo, hi = bench.parse_range(args.qubits)
        points = bench.qubit_points(lo, hi, args.step)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    workers = (os.cpu_count() or 1) if args.parallel else 1
    records = bench.run_bench(args.family, points, args.reps, workers, args.batches)
    bench.write_csv(records, args.csv, args.reps, args.batches)
    for r in records:
        print(f"{r.circuit_family} n={r.num_qubits:3d} words={r.word_count:6d} "
              f"t={r.compile_time * 1e6:10.2f} us peak={r.peak_bytes} B")
    if args.reps == 1:
        print("note: reps=1, timings are single-run and noisy", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="uqp", description="QIR to 32-bit offload ISA toolchain")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="lower a QIR base-profile kernel to a binary program")
    c.add_argument("input")
    c.add_argument("-o", "--output")
    c.add_argument("--target", choices=sorted(TARGETS), default="sc")
    c.add_argument("--shots", type=int, default=1000)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("run", help="execute a binary program on the simulated control processor")
    r.add_argument("input")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--shots", type=int, help="override the header shot count")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.add_argument("-o", "--output")
    r.add_argument("--trace", help="also write the shot-0 pulse trace as CSV")
    r.add_argument("--step", action="store_true", help="interpret every shot word by word")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("disasm", help="print an annotated listing of a binary program")
    d.add_argument("input")
    d.set_defaults(func=cmd_disasm)

    b = sub.add_parser("bench", help="time lowering across a kernel family")
    b.add_argument("--family", choices=sorted(bench.FAMILIES), default="ghz")
    b.add_argument("--qubits", default="5..100", help="inclusive range A..B")
    b.add_argument("--step", type=int, default=5)
    b.add_argument("--reps", type=int, default=1000)
    b.add_argument("--batches", type=int, default=3, help="timed batches per point; the fastest is kept")
    b.add_argument("--csv", required=True)
    b.add_argument("--parallel", action="store_true", help="shard points across processes")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UserError as exc:
        _fail(str(exc))
        return EXIT_USER
    except USER_ERRORS as exc:
        _fail(_describe(exc, getattr(args, "input", None)))
        return EXIT_USER
    except Exception as exc:  # anything else is a bug in uqp
        _fail(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
