"""Scaling benchmark of the lowering step over generated kernel families."""

from __future__ import annotations

import csv
import gc
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from .circuits import FAMILIES
from .isa import MAX_QUBITS
from .lowering import JobOptions, lower

MIN_QUBITS = 2


@dataclass(frozen=True)
class BenchRecord:
    circuit_family: str
    num_qubits: int
    gate_count: int
    word_count: int
    compile_time: float
    peak_bytes: int


def parse_range(text: str) -> tuple[int, int]:
    """``"5..100"`` -> ``(5, 100)``."""
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ValueError(f"expected A..B, got {text!r}")
    return int(lo), int(hi)


def qubit_points(lo: int, hi: int, step: int) -> list[int]:
    if step < 1:
        raise ValueError("step must be >= 1")
    if not MIN_QUBITS <= lo <= hi <= MAX_QUBITS:
        raise ValueError(f"qubit range {lo}..{hi} must lie within [{MIN_QUBITS}, {MAX_QUBITS}]")
    return list(range(lo, hi + 1, step))


def _time_batch(kernel, opts: JobOptions, reps: int) -> float:
    t0 = time.perf_counter()
    for _ in range(reps):
        lower(kernel, opts)
    return time.perf_counter() - t0


def _timed_rounds(kernels: list, reps: int, batches: int) -> list[float]:
    """Best-of-``batches`` mean time per kernel, with rounds interleaved across kernels.

    Each round times every kernel once, so a slow spell on a shared machine
    lands on all sizes alike instead of skewing one stretch of the sweep.
    """
    opts = JobOptions()
    for k in kernels:  # warm-up
        _time_batch(k, opts, max(1, reps // 10))
    best = [float("inf")] * len(kernels)
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(batches):
            for i, k in enumerate(kernels):
                best[i] = min(best[i], _time_batch(k, opts, reps))
    finally:
        if gc_was_enabled:
            gc.enable()
    return [b / reps for b in best]


def _record(family: str, n: int, kernel, compile_time: float) -> BenchRecord:
    _, report = lower(kernel, JobOptions(), track_memory=True)
    return BenchRecord(family, n, kernel.gate_count, report.word_count, compile_time, report.peak_bytes)


def measure_point(family: str, n: int, reps: int, batches: int = 3) -> BenchRecord:
    """Mean ``lower`` time over ``reps`` calls, best of ``batches`` batches."""
    kernel = FAMILIES[family](n)
    return _record(family, n, kernel, _timed_rounds([kernel], reps, batches)[0])


def _point(args: tuple[str, int, int, int]) -> BenchRecord:
    return measure_point(*args)


def run_bench(family: str, qubits: list[int], reps: int = 1000,
              workers: int = 1, batches: int = 3) -> list[BenchRecord]:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    if reps < 1 or batches < 1:
        raise ValueError("reps and batches must be >= 1")
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_point, [(family, n, reps, batches) for n in qubits]))
    kernels = [FAMILIES[family](n) for n in qubits]
    times = _timed_rounds(kernels, reps, batches)
    return [_record(family, n, k, t) for n, k, t in zip(qubits, kernels, times)]


def write_csv(records: list[BenchRecord], path: str | Path, reps: int, batches: int = 3) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# lowering benchmark, mean of {reps} repetition(s) per point, best of {batches} batch(es), "
                 "compile_time in seconds\n")
        if reps == 1:
            fh.write("# noisy: single-run timings\n")
        w = csv.writer(fh)
        w.writerow([f.name for f in fields(BenchRecord)])
        for rec in records:
            w.writerow(astuple(rec))


def read_csv(path: str | Path) -> list[BenchRecord]:
    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        return [BenchRecord(r["circuit_family"], int(r["num_qubits"]), int(r["gate_count"]),
                            int(r["word_count"]), float(r["compile_time"]), int(r["peak_bytes"]))
                for r in rows]


def loglog_slope(xs: list[float], ys: list[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx, my = sum(lx) / len(lx), sum(ly) / len(ly)
    sxx = sum((a - mx) ** 2 for a in lx)
    sxy = sum((a - mx) * (b - my) for a, b in zip(lx, ly))
    return sxy / sxx
