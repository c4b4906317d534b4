"""Compare the compiled and pure-Python shot-replay kernels.

    python benchmarks/bench_replay.py [--shots N] [--csv out.csv]

Both kernels get the same op table and uniforms, so their records must agree
bit for bit; the script checks that before reporting timings.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from uqp import qcp, replay
from uqp.circuits import ghz, linear_entangler, qft_like
from uqp.lowering import JobOptions, lower

CASES = [("ghz", 4), ("ghz", 12), ("lin", 10), ("qftlike", 6), ("qftlike", 14)]
BUILDERS = {"ghz": ghz, "lin": linear_entangler, "qftlike": qft_like}


def op_table(family: str, n: int, shots: int, seed: int = 0):
    program, _ = lower(BUILDERS[family](n), JobOptions(shots=shots))
    inst = qcp.load(program)
    inst.run_shot(seed, 0)  # records the op log
    ops, mats = inst._op_table()
    uniforms = np.stack([qcp._stream(seed, s, qcp.PURPOSE_MEASURE).random(inst.draws)
                         for s in range(shots)])
    return ops, mats, program.num_qubits, program.num_results, uniforms


def best_of(fn, args, repeat: int) -> tuple[float, np.ndarray]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shots", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)

    if replay.compiled_replay_shots is None:
        print("compiled kernel unavailable (extension not built or UQP_PURE_PYTHON=1)", file=sys.stderr)
        return 1
    rows = []
    print(f"{'case':<12} {'ops':>5} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    for family, n in CASES:
        table = op_table(family, n, args.shots)
        t_py, r_py = best_of(replay.python_replay_shots, table, args.repeat)
        t_c, r_c = best_of(replay.compiled_replay_shots, table, args.repeat)
        if not np.array_equal(r_py, r_c):
            print(f"{family}{n}: kernels disagree", file=sys.stderr)
            return 2
        rows.append((f"{family}{n}", len(table[0]), args.shots, t_py, t_c, t_py / t_c))
        print(f"{family + str(n):<12} {len(table[0]):>5} {t_py:>10.4f} {t_c:>11.4f} {t_py / t_c:>7.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "ops", "shots", "python_s", "compiled_s", "speedup"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
