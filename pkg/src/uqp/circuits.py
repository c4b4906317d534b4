"""Built-in kernel families for the scaling benchmark."""

from __future__ import annotations

import math

from .qir import Gate1Q, Gate1QAngle, Gate2Q, KernelOp, Measure, QuantumKernel, ResultRecord


def _measure_all(n: int) -> list[KernelOp]:
    return [Measure(q, q) for q in range(n)] + [ResultRecord(q) for q in range(n)]


def ghz(n: int) -> QuantumKernel:
    ops: list[KernelOp] = [Gate1Q("h", 0)]
    ops += [Gate2Q("cnot", q, q + 1) for q in range(n - 1)]
    return QuantumKernel(f"ghz{n}", n, n, tuple(ops + _measure_all(n)))


def linear_entangler(n: int) -> QuantumKernel:
    """One RY layer followed by a nearest-neighbour CNOT chain."""
    ops: list[KernelOp] = [Gate1QAngle("ry", q, math.pi / (q + 2)) for q in range(n)]
    ops += [Gate2Q("cnot", q, q + 1) for q in range(n - 1)]
    return QuantumKernel(f"lin{n}", n, n, tuple(ops + _measure_all(n)))


def qft_like(n: int) -> QuantumKernel:
    """All-pairs phase ladder: O(n^2) two-qubit gates, like amplitude-estimation circuits."""
    ops: list[KernelOp] = []
    for i in range(n):
        ops.append(Gate1Q("h", i))
        for j in range(i + 1, n):
            ops.append(Gate1QAngle("rz", j, math.pi / 2 ** (j - i)))
            ops.append(Gate2Q("cnot", i, j))
    return QuantumKernel(f"qftlike{n}", n, n, tuple(ops + _measure_all(n)))


FAMILIES = {"ghz": ghz, "lin": linear_entangler, "qftlike": qft_like}
