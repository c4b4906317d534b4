"""Code generation from a validated kernel to a :class:`~uqp.isa.BinaryProgram`.

Emission is verbatim and strictly sequential: no optimization passes. Qubit ``i``
lives at address-register bit ``i`` and result ``j`` in result register ``j``.
"""

from __future__ import annotations

import struct
import time
import tracemalloc
from collections.abc import Mapping
from dataclasses import dataclass

from . import isa
from .isa import (
    DEFAULT_TIMING, GATE_CODES, MAX_ANGLES, MAX_QUBITS, MODE_PAIR_BASE, MODE_TARGET_PREFIX,
    PAIR_FLAG, QUBIT_SEGMENT, RESULT_LANES, LANE_SHIFT, AtomPrepKind, BinaryProgram, Target,
)
from .qir import Gate1Q, Gate1QAngle, Gate2Q, Measure, QuantumKernel, ResultRecord


class LoweringError(Exception):
    pass


class AnglePoolOverflow(LoweringError):
    pass


class UnsupportedGateForTarget(LoweringError):
    pass


@dataclass(frozen=True)
class JobOptions:
    target: Target = Target.SUPERCONDUCTING
    shots: int = 1000
    seed: int | None = None

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        object.__setattr__(self, "target", Target(self.target))


@dataclass(frozen=True)
class LoweringReport:
    word_count: int
    angle_count: int
    peak_bytes: int
    wall_time: float
    recorded_results: tuple[int, ...] = ()


ATOM_PROLOGUE = tuple(isa.atomprep_word(k) for k in AtomPrepKind)

# Words emitted per kernel op; a two-qubit gate on a non-adjacent pair pays one
# extra target-prefix word.
WORD_COST = {"gate1q": 2, "rotation": 2, "gate2q": 2, "measure": 3, "record": 0}


def emission_cost(kernel: QuantumKernel, target: Target = Target.SUPERCONDUCTING) -> int:
    """Closed-form word count of :func:`lower` for ``kernel``."""
    n = 2 + (len(ATOM_PROLOGUE) if target == Target.NEUTRAL_ATOM else 0)
    for op in kernel.ops:
        if isinstance(op, Gate1Q):
            n += WORD_COST["gate1q"]
        elif isinstance(op, Gate1QAngle):
            n += WORD_COST["rotation"]
        elif isinstance(op, Gate2Q):
            n += WORD_COST["gate2q"] + (op.target != op.control + 1)
        elif isinstance(op, Measure):
            n += WORD_COST["measure"]
    return n


def _angle_key(angle: float) -> bytes:
    return struct.pack("<d", angle)


def _timing_table(durations: Mapping[str, int]) -> dict[str, int]:
    unknown = set(durations) - set(GATE_CODES)
    if unknown:
        raise ValueError(f"durations name unknown gates: {sorted(unknown)}")
    timing = {g: durations.get(g, DEFAULT_TIMING) for g in GATE_CODES}
    for g, t in timing.items():
        if not 0 <= t < 64:
            raise isa.FieldOverflow(f"duration of {g} ({t}) does not fit the 6-bit timing field")
    return timing


_DEFAULT_TIMING = _timing_table({})


def _emit(kernel: QuantumKernel, opts: JobOptions,
          durations: Mapping[str, int]) -> tuple[list[int], list[float]]:
    words = [isa.envinit_word(max(kernel.num_qubits, kernel.num_results))]
    if opts.target == Target.NEUTRAL_ATOM:
        words.extend(ATOM_PROLOGUE)
    angles: list[float] = []
    angle_index: dict[bytes, int] = {}
    timing = _timing_table(durations) if durations else _DEFAULT_TIMING
    append = words.append
    mz_word = GATE_CODES["mz"] << 22 | timing["mz"] | isa.CLASS_QUANTUM << 28
    memload = isa.CLASS_MEMLOAD << 28
    for op in kernel.ops:
        cls = type(op)
        if cls is Gate1Q:
            seg, bit = divmod(op.qubit, QUBIT_SEGMENT)
            append(memload | seg << 24 | 1 << bit)
            name = op.gate_name
            append(isa.CLASS_QUANTUM << 28 | GATE_CODES[name] << 22 | timing[name])
        elif cls is Gate1QAngle:
            key = _angle_key(op.angle)
            idx = angle_index.get(key)
            if idx is None:
                idx = angle_index[key] = len(angles)
                if idx >= MAX_ANGLES:
                    raise AnglePoolOverflow(f"more than {MAX_ANGLES} distinct rotation angles")
                angles.append(op.angle)
            seg, bit = divmod(op.qubit, QUBIT_SEGMENT)
            append(memload | seg << 24 | 1 << bit)
            name = op.gate_name
            append(isa.CLASS_QUANTUM << 28 | GATE_CODES[name] << 22 | idx << 6 | timing[name])
        elif cls is Gate2Q:
            if op.target != op.control + 1:
                tseg, tbit = divmod(op.target, QUBIT_SEGMENT)
                append(memload | MODE_TARGET_PREFIX << 24 | 1 << (16 + tseg) | 1 << tbit)
            seg, bit = divmod(op.control, QUBIT_SEGMENT)
            append(memload | (MODE_PAIR_BASE + seg) << 24 | 1 << bit)
            name = op.gate_name
            append(isa.CLASS_QUANTUM << 28 | GATE_CODES[name] << 22 | PAIR_FLAG << 6 | timing[name])
        elif cls is Measure:
            seg, bit = divmod(op.qubit, QUBIT_SEGMENT)
            lane = op.result % RESULT_LANES
            append(memload | seg << 24 | 1 << (16 + LANE_SHIFT + lane) | 1 << bit)
            append(mz_word | (lane + 1) << 17)
            rseg, rbit = divmod(op.result, QUBIT_SEGMENT)
            append(isa.CLASS_RESULT << 28 | isa.RESULT_FETCH_LAST << 24 | rseg << 16 | 1 << rbit)
        elif cls is not ResultRecord:
            raise TypeError(f"unexpected kernel op {op!r}")
    append(isa.HALT_WORD)
    return words, angles


def lower(kernel: QuantumKernel, opts: JobOptions = JobOptions(), *,
          durations: Mapping[str, int] | None = None,
          track_memory: bool = False) -> tuple[BinaryProgram, LoweringReport]:
    """Map a validated kernel and job options to an offload program.

    ``durations`` overrides the per-gate timing field (cycles, default 4).
    With ``track_memory`` the report carries the tracemalloc peak of the call;
    otherwise ``peak_bytes`` is 0 and timing is unperturbed.
    """
    if kernel.num_qubits > MAX_QUBITS:
        raise isa.QubitCountExceeded(
            f"kernel needs {kernel.num_qubits} qubits; the 32-bit ISA addresses at most {MAX_QUBITS}")
    started_here = False
    if track_memory:
        if tracemalloc.is_tracing():
            tracemalloc.reset_peak()
            base = tracemalloc.get_traced_memory()[0]
        else:
            tracemalloc.start()
            started_here = True
            base = 0
    t0 = time.perf_counter()
    try:
        words, angles = _emit(kernel, opts, durations or {})
        program = BinaryProgram(opts.target, kernel.num_qubits, kernel.num_results, opts.shots,
                                tuple(words), tuple(angles))
        wall = time.perf_counter() - t0
        peak = 0
        if track_memory:
            peak = tracemalloc.get_traced_memory()[1] - base
    finally:
        if started_here:
            tracemalloc.stop()
    report = LoweringReport(len(program.words), len(program.angle_table), peak, wall,
                            kernel.recorded_results)
    return program, report
