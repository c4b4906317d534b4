"""Cycle-level simulator of the cross-technology quantum control processor.

The processor decodes the word stream sequentially, keeps the address and
result registers, emits pulse events from a per-modality pulse library and
drives an embedded state-vector backend (up to 20 qubits; larger programs run
trace-only). Neutral-atom programs dispatch AtomPrep words to
:class:`uqp.atoms.AtomPrepUnit`.

Shot 0 always runs through :meth:`QcpInstance.step`. Because base-profile
programs have no feedback, the quantum op sequence is the same in every shot,
so the remaining shots replay the op log recorded in shot 0 through
:mod:`uqp.replay`.
"""

from __future__ import annotations

import csv
import io
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import isa, replay
from . import statevector as sv
from .atoms import AtomPipelineError, AtomPrepConfig, AtomPrepUnit
from .isa import (
    GATE_CODES, GATE_NAMES, QUBIT_SEGMENT, STATEVECTOR_LIMIT,
    AtomPrep, AtomPrepKind, BinaryProgram, EnvInit, FetchResult, Halt, MemLoad, QuantumOp, Target,
)

PURPOSE_MEASURE = 0
PURPOSE_ATOMS = 1


class QcpError(Exception):
    pass


class MissingWaveform(QcpError):
    pass


class BadProgram(QcpError):
    pass


class MeasureWithoutPendingResult(QcpError):
    pass


class AtomPrepOnSuperconducting(QcpError):
    pass


class ExecutionFault(QcpError):
    """Register misuse: empty address register, out-of-range qubit, fetch with no latch."""


class ShotError(QcpError):
    def __init__(self, shot: int, pc: int, cause: Exception):
        self.shot, self.pc, self.cause = shot, pc, cause
        super().__init__(f"shot {shot}, word {pc}: {type(cause).__name__}: {cause}")


@dataclass(frozen=True)
class PulseEvent:
    t: int
    channel: int | tuple[int, int]
    waveform_id: str
    params: dict[str, float] = field(default_factory=dict)


_MODALITY_KEYS = {Target.SUPERCONDUCTING: "superconducting", Target.NEUTRAL_ATOM: "neutral_atom"}


@dataclass
class PulseLibrary:
    entries: dict[tuple[int, int], tuple[str, dict[str, float]]]

    @classmethod
    def from_dict(cls, data: dict) -> PulseLibrary:
        entries = {}
        for target, key in _MODALITY_KEYS.items():
            for gate, spec in data.get(key, {}).items():
                if gate not in GATE_CODES:
                    raise ValueError(f"pulse library names unknown gate {gate!r}")
                entries[(int(target), GATE_CODES[gate])] = (spec["waveform"], dict(spec.get("params", {})))
        return cls(entries)

    @classmethod
    def from_file(cls, path: str | Path) -> PulseLibrary:
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def default(cls) -> PulseLibrary:
        """Bundled library, or the file named by ``UQP_PULSE_LIB``."""
        override = os.environ.get("UQP_PULSE_LIB")
        if override:
            return cls.from_file(override)
        text = resources.files("uqp").joinpath("data/pulse_library.json").read_text()
        return cls.from_dict(json.loads(text))

    def restricted(self, *targets: Target) -> PulseLibrary:
        keep = {int(t) for t in targets}
        return PulseLibrary({k: v for k, v in self.entries.items() if k[0] in keep})

    def without(self, target: Target, gate: str) -> PulseLibrary:
        return PulseLibrary({k: v for k, v in self.entries.items()
                             if k != (int(target), GATE_CODES[gate])})

    def lookup(self, target: Target, gate_code: int) -> tuple[str, dict[str, float]]:
        try:
            return self.entries[(int(target), gate_code)]
        except KeyError:
            raise MissingWaveform(
                f"no {_MODALITY_KEYS[Target(target)]} waveform for gate {GATE_NAMES[gate_code]}") from None


@dataclass
class MachineState:
    pc: int = 0
    qubit_addr_reg: int = 0
    pair_reg: tuple[int, int] | None = None
    result_regs: list[int] = field(default_factory=list)
    clock: int = 0
    halted: bool = False
    modality: Target = Target.SUPERCONDUCTING
    pending_lane: int | None = None
    pending_target: int | None = None
    latch: int | None = None
    latched: bool = False


@dataclass(frozen=True)
class StepOutcome:
    pc: int
    instruction: isa.Instruction
    events: tuple[PulseEvent, ...] = ()
    measured: int | None = None


@dataclass
class ExecutionReport:
    shots: int
    num_results: int
    records: list[str]
    histogram: dict[str, int]
    pulse_trace: list[PulseEvent]
    atom_prep_log: dict | None = None
    trace_only: bool = False
    final_clock: int = 0
    backend: str = "python"

    def to_dict(self) -> dict:
        return {
            "shots": self.shots,
            "num_results": self.num_results,
            "trace_only": self.trace_only,
            "final_clock": self.final_clock,
            "backend": self.backend,
            "histogram": dict(sorted(self.histogram.items())),
            "records": self.records,
            "pulse_trace": [
                {"t": e.t, "channel": list(e.channel) if isinstance(e.channel, tuple) else e.channel,
                 "waveform_id": e.waveform_id, "params": e.params}
                for e in self.pulse_trace
            ],
            "atom_prep_log": self.atom_prep_log,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bitstring", "count"])
        for k, v in sorted(self.histogram.items()):
            w.writerow([k, v])
        return buf.getvalue()

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "channel", "waveform_id", "params"])
        for e in self.pulse_trace:
            ch = "-".join(map(str, e.channel)) if isinstance(e.channel, tuple) else e.channel
            w.writerow([e.t, ch, e.waveform_id, *(f"{k}={v}" for k, v in e.params.items())])
        return buf.getvalue()

    def merge(self, other: ExecutionReport) -> ExecutionReport:
        """Combine reports of disjoint shot ranges; ``self`` must hold the earlier shots."""
        hist = Counter(self.histogram)
        hist.update(other.histogram)
        return ExecutionReport(
            self.shots + other.shots, self.num_results, self.records + other.records, dict(hist),
            self.pulse_trace or other.pulse_trace, self.atom_prep_log or other.atom_prep_log,
            self.trace_only and other.trace_only, self.final_clock or other.final_clock, self.backend)


def _stream(seed: int, shot: int, purpose: int) -> np.random.Generator:
    # Counter-based: the (seed, purpose) pair keys Philox and the shot index is the counter.
    key = (seed & (2**64 - 1)) | (purpose << 64)
    return np.random.Generator(np.random.Philox(key=key, counter=[shot, 0, 0, 0]))


def _single_qubits(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


class QcpInstance:
    """One loaded program plus its machine state."""

    def __init__(self, program: BinaryProgram, library: PulseLibrary,
                 atom_config: AtomPrepConfig | None = None):
        self.program = program
        self.library = library
        self.atom_config = atom_config or AtomPrepConfig()
        self.modality = Target(program.target)
        self.trace_only = program.num_qubits > STATEVECTOR_LIMIT
        self._decoded: list[isa.Instruction | None] = [None] * len(program.words)
        self.atoms: AtomPrepUnit | None = None
        if self.modality == Target.NEUTRAL_ATOM:
            self.atoms = AtomPrepUnit(self.atom_config, program.num_qubits)
        self.begin_shot(0, 0)

    # -- per-shot setup -------------------------------------------------
    def begin_shot(self, seed: int, shot: int) -> None:
        self.state = MachineState(modality=self.modality,
                                  result_regs=[0] * self.program.num_results)
        self.psi: np.ndarray | None = None
        self._rng = _stream(seed, shot, PURPOSE_MEASURE)
        self._atom_rng = _stream(seed, shot, PURPOSE_ATOMS)
        self.trace: list[PulseEvent] = []
        self.oplog: list[tuple[int, int, int, np.ndarray | None]] = []
        self.draws = 0
        if self.atoms is not None:
            self.atoms.reset()

    def _instr(self, pc: int) -> isa.Instruction:
        ins = self._decoded[pc]
        if ins is None:
            word = self.program.words[pc]
            try:
                ins = isa.decode(word)
            except isa.IllegalOpcode as exc:
                raise isa.IllegalOpcode(word, str(exc), offset=pc) from None
            self._decoded[pc] = ins
        return ins

    def _check_qubit(self, q: int) -> None:
        if q >= self.program.num_qubits:
            raise ExecutionFault(f"qubit {q} outside the {self.program.num_qubits}-qubit register")

    def _uniform(self) -> float:
        self.draws += 1
        return float(self._rng.random())

    # -- execution ------------------------------------------------------
    def step(self) -> StepOutcome:
        st = self.state
        if st.halted:
            raise ExecutionFault("processor is halted")
        if st.pc >= len(self.program.words):
            raise ExecutionFault("program counter ran past the last word without Halt")
        pc = st.pc
        ins = self._instr(pc)
        events: tuple[PulseEvent, ...] = ()
        measured = None

        if isinstance(ins, EnvInit):
            st.qubit_addr_reg, st.pair_reg = 0, None
            st.result_regs = [0] * self.program.num_results
            st.pending_lane = st.pending_target = st.latch = None
            st.latched = False
            self.psi = None if self.trace_only else sv.zero_state(self.program.num_qubits)
        elif isinstance(ins, MemLoad):
            self._memload(ins)
        elif isinstance(ins, QuantumOp):
            events, measured = self._quantum(ins)
        elif isinstance(ins, FetchResult):
            try:
                r = ins.result
            except ValueError:
                raise ExecutionFault(f"fetch selector 0x{ins.reg_sel:04x} is not one-hot") from None
            if r >= self.program.num_results:
                raise ExecutionFault(f"result register {r} outside {self.program.num_results}")
            if not st.latched:
                raise ExecutionFault("fetch with no measurement latched")
            if st.latch is not None:
                st.result_regs[r] = st.latch
            self.oplog.append((replay.OP_FETCH, r, 0, None))
        elif isinstance(ins, AtomPrep):
            self._atom_prep(ins.kind)
        elif isinstance(ins, Halt):
            st.halted = True
        st.pc += 1
        return StepOutcome(pc, ins, events, measured)

    def _memload(self, ins: MemLoad) -> None:
        st = self.state
        try:
            qubits = ins.addressed_qubits()
            lane = ins.result_lane()
        except ValueError as exc:
            raise ExecutionFault(str(exc)) from None
        for q in qubits:
            self._check_qubit(q)
        if ins.is_target_prefix:
            if len(qubits) != 1:
                raise ExecutionFault("target prefix must address exactly one qubit")
            st.pending_target = qubits[0]
            return
        if ins.is_pair:
            if len(qubits) != 1:
                raise ExecutionFault("pair load must address exactly one control qubit")
            c = qubits[0]
            t = st.pending_target if st.pending_target is not None else c + 1
            self._check_qubit(t)
            if t == c:
                raise ExecutionFault(f"pair load with control == target == {c}")
            st.pair_reg = (c, t)
            st.qubit_addr_reg = 1 << c | 1 << t
            st.pending_target = None
            st.pending_lane = None
            return
        st.qubit_addr_reg = ins.qubit_mask << (ins.mode * QUBIT_SEGMENT)
        st.pair_reg = None
        st.pending_target = None
        st.pending_lane = lane

    def _quantum(self, ins: QuantumOp) -> tuple[tuple[PulseEvent, ...], int | None]:
        st = self.state
        name = ins.gate
        waveform, base_params = self.library.lookup(self.modality, ins.gate_code)
        measured = None
        events = []
        if ins.gate_code in isa.TWO_QUBIT_CODES:
            if st.pair_reg is None:
                raise ExecutionFault(f"{name} issued without a pair load")
            c, t = st.pair_reg
            events.append(PulseEvent(st.clock, (c, t), waveform, dict(base_params)))
            kind = {"cnot": replay.OP_CX, "cz": replay.OP_CZ, "swap": replay.OP_SWAP}[name]
            if self.psi is not None:
                self.psi = sv.apply_gate(self.psi, ins.gate_code, (c, t))
            self.oplog.append((kind, c, t, None))
        else:
            qubits = _single_qubits(st.qubit_addr_reg)
            if not qubits:
                raise ExecutionFault(f"{name} issued with an empty address register")
            if name == "mz":
                if len(qubits) != 1:
                    raise ExecutionFault("mz needs exactly one addressed qubit")
                if st.pending_lane is None:
                    raise MeasureWithoutPendingResult(
                        f"mz on qubit {qubits[0]} without a result selector loaded")
                q = qubits[0]
                events.append(PulseEvent(st.clock, q, waveform, dict(base_params)))
                if self.psi is not None:
                    measured, self.psi = sv.measure(self.psi, q, self._uniform())
                self.oplog.append((replay.OP_MEASURE, q, 0, None))
                st.latch, st.latched = measured, True
                st.pending_lane = None
            else:
                params = dict(base_params)
                matrix = None
                if ins.angle_index is not None:
                    if ins.angle_index >= len(self.program.angle_table):
                        raise ExecutionFault(f"angle index {ins.angle_index} outside the table")
                    angle = self.program.angle_table[ins.angle_index]
                    params["angle"] = angle
                    matrix = sv.gate_matrix(name, angle)
                elif name != "reset":
                    matrix = sv.gate_matrix(name)
                for q in qubits:
                    events.append(PulseEvent(st.clock, q, waveform, dict(params)))
                    if name == "reset":
                        if self.psi is not None:
                            self.psi = sv.reset(self.psi, q, self._uniform())
                        self.oplog.append((replay.OP_RESET, q, 0, None))
                    else:
                        if self.psi is not None:
                            self.psi = sv.apply_matrix(self.psi, matrix, q)
                        self.oplog.append((replay.OP_U1, q, 0, matrix))
        st.clock += ins.timing
        self.trace.extend(events)
        return tuple(events), measured

    def _atom_prep(self, kind: AtomPrepKind) -> None:
        if self.atoms is None:
            raise AtomPrepOnSuperconducting(f"{kind.name} issued on a superconducting target")
        _dispatch_atom(self.atoms, kind, self._atom_rng)

    def run_shot(self, seed: int, shot: int) -> list[int]:
        self.begin_shot(seed, shot)
        while not self.state.halted:
            pc = self.state.pc
            try:
                self.step()
            except QcpError as exc:
                raise ShotError(shot, pc, exc) from exc
            except (isa.IsaError, AtomPipelineError) as exc:
                raise ShotError(shot, pc, exc) from exc
        return list(self.state.result_regs)

    def _op_table(self) -> tuple[np.ndarray, np.ndarray]:
        mats: list[np.ndarray] = []
        index: dict[bytes, int] = {}
        rows = []
        for kind, a, b, m in self.oplog:
            mi = 0
            if m is not None:
                key = m.tobytes()
                if key not in index:
                    index[key] = len(mats)
                    mats.append(m)
                mi = index[key]
            rows.append((kind, a, b, mi))
        ops = np.array(rows, dtype=np.int64).reshape(-1, 4)
        mat_arr = np.array(mats, dtype=np.complex128).reshape(-1, 2, 2)
        if not len(mat_arr):
            mat_arr = np.zeros((1, 2, 2), dtype=np.complex128)
        return np.ascontiguousarray(ops), np.ascontiguousarray(mat_arr)


def load(program: BinaryProgram, library: PulseLibrary | None = None,
         atom_config: AtomPrepConfig | None = None) -> QcpInstance:
    """Check a program against the pulse library and return a ready instance."""
    library = library or PulseLibrary.default()
    if not program.words:
        raise BadProgram("program has no words")
    try:
        instrs = program.instructions()
    except isa.IllegalOpcode as exc:
        raise BadProgram(str(exc)) from exc
    if not isinstance(instrs[0], EnvInit):
        raise BadProgram("first word is not EnvInit")
    target = Target(program.target)
    if not any(k[0] == int(target) for k in library.entries):
        raise MissingWaveform(f"pulse library has no {_MODALITY_KEYS[target]} section")
    for ins in instrs:
        if isinstance(ins, QuantumOp):
            library.lookup(target, ins.gate_code)
    return QcpInstance(program, library, atom_config)


def run(instance: QcpInstance, seed: int = 0, *, fast: bool = True, first_shot: int = 0,
        shots: int | None = None, kernel=None) -> ExecutionReport:
    """Execute ``shots`` replays (default: the header's shot count) and aggregate.

    Shot ``s`` draws its measurement outcomes from the Philox stream keyed by
    ``(seed, s)``, so any partition of the shot range merges into the same report.
    """
    total = instance.program.shots if shots is None else shots
    nr = instance.program.num_results
    records_bits: list[list[int]] = []
    trace: list[PulseEvent] = []
    atom_log = None
    final_clock = 0
    backend = "python-step"
    kernel = kernel or replay.replay_shots

    if total > 0:
        bits = instance.run_shot(seed, first_shot)
        trace = list(instance.trace) if first_shot == 0 else []
        final_clock = instance.state.clock
        if instance.atoms is not None:
            atom_log = instance.atoms.log()
        if not instance.trace_only:
            records_bits.append(bits)

    plan_sizes = [atom_log["plan_size"]] if atom_log else []
    rest = range(first_shot + 1, first_shot + total)
    if instance.trace_only:
        pass
    elif fast and len(rest):
        ops, mats = instance._op_table()
        n_draws = instance.draws
        uniforms = np.empty((len(rest), n_draws))
        for i, s in enumerate(rest):
            uniforms[i] = _stream(seed, s, PURPOSE_MEASURE).random(n_draws)
            if instance.atoms is not None:
                plan_sizes.append(_replay_atom_prep(instance, seed, s))
        out = kernel(ops, mats, instance.program.num_qubits, nr, uniforms)
        records_bits.extend(out.tolist())
        backend = "compiled" if kernel is replay.compiled_replay_shots else "python"
    else:
        for s in rest:
            records_bits.append(instance.run_shot(seed, s))
            if instance.atoms is not None:
                plan_sizes.append(instance.atoms.log()["plan_size"])

    if atom_log is not None:
        atom_log["plan_sizes"] = {"min": min(plan_sizes), "max": max(plan_sizes),
                                  "mean": sum(plan_sizes) / len(plan_sizes)}
    records = ["".join(map(str, b)) for b in records_bits]
    histogram = dict(Counter(records))
    return ExecutionReport(len(records) if not instance.trace_only else total, nr, records,
                           histogram, trace, atom_log, instance.trace_only, final_clock, backend)


def _replay_atom_prep(instance: QcpInstance, seed: int, shot: int) -> int:
    # AtomPrep words do not touch the quantum state, so fast replays run them in
    # word order on their own, with the same per-shot stream step() would use.
    unit = instance.atoms
    unit.reset()
    rng = _stream(seed, shot, PURPOSE_ATOMS)
    for pc in range(len(instance.program.words)):
        ins = instance._instr(pc)
        if isinstance(ins, AtomPrep):
            try:
                _dispatch_atom(unit, ins.kind, rng)
            except AtomPipelineError as exc:
                raise ShotError(shot, pc, exc) from exc
    return len(unit.plan) if unit.plan is not None else 0


def _dispatch_atom(unit: AtomPrepUnit, kind: AtomPrepKind, rng: np.random.Generator) -> None:
    if kind == AtomPrepKind.IMAGE_FETCH:
        unit.image_fetch(rng)
    elif kind == AtomPrepKind.ATOM_DETECT:
        unit.atom_detect()
    elif kind == AtomPrepKind.ATOM_SORT:
        unit.atom_sort()
    else:
        unit.atom_move()


def read_program(path: str | Path) -> BinaryProgram:
    return isa.load_image(Path(path).read_bytes())
