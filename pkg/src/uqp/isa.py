"""Unified 32-bit hybrid instruction set: encoding, decoding and the offload image.

Word layout (bit 31 is the MSB)::

    [31:28] class
        0000  Halt (payload must be zero)
        0010  classical result op, sub-op [27:24]; 1010 = fetch last measurement
        0100  EnvInit, size [15:0]
        0101  MemLoad, mode [27:24], result selector [23:16] (lane one-hot in [23:20]),
              qubit mask [15:0]
        0110  AtomPrep, sub-op [27:24]
        1000  QuantumOp, gate [27:22], operand [21:6], timing [5:0]

Every other class, sub-op or nonzero reserved field decodes to IllegalOpcode.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

MAX_QUBITS = 100
MAX_ANGLES = 4096
STATEVECTOR_LIMIT = 20

CLASS_HALT = 0b0000
CLASS_RESULT = 0b0010
CLASS_ENVINIT = 0b0100
CLASS_MEMLOAD = 0b0101
CLASS_ATOMPREP = 0b0110
CLASS_QUANTUM = 0b1000

RESULT_FETCH_LAST = 0b1010

# MemLoad modes
MODE_TARGET_PREFIX = 0b1000
MODE_PAIR_BASE = 0b1001
QUBIT_SEGMENT = 16
RESULT_LANES = 4
LANE_SHIFT = 4  # lanes occupy the high nibble of the result-selector byte
MAX_SEGMENTS = 7

PAIR_FLAG = 1 << 15
DEFAULT_TIMING = 4

GATE_CODES: dict[str, int] = {
    "x": 0b000001,
    "y": 0b000010,
    "z": 0b000011,
    "s": 0b000100,
    "t": 0b000101,
    "sx": 0b000110,
    "mz": 0b000111,
    "reset": 0b001000,
    "rx": 0b001001,
    "ry": 0b001010,
    "rz": 0b001011,
    "h": 0b001111,
    "cnot": 0b010000,
    "cz": 0b010001,
    "swap": 0b010010,
}
GATE_NAMES: dict[int, str] = {code: name for name, code in GATE_CODES.items()}
ROTATION_GATES = frozenset({"rx", "ry", "rz"})
TWO_QUBIT_GATES = frozenset({"cnot", "cz", "swap"})
ROTATION_CODES = frozenset(GATE_CODES[g] for g in ROTATION_GATES)
TWO_QUBIT_CODES = frozenset(GATE_CODES[g] for g in TWO_QUBIT_GATES)

MAGIC = b"UQPB"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHBBHHIHH")
WORD_COUNT = struct.Struct("<I")


class Target(enum.IntEnum):
    SUPERCONDUCTING = 0
    NEUTRAL_ATOM = 1


class AtomPrepKind(enum.IntEnum):
    IMAGE_FETCH = 0b0001
    ATOM_DETECT = 0b0010
    ATOM_SORT = 0b0011
    ATOM_MOVE = 0b0100


class IsaError(Exception):
    """Base class for encoding, decoding and image errors."""


class FieldOverflow(IsaError):
    pass


class IllegalOpcode(IsaError):
    def __init__(self, word: int, reason: str, offset: int | None = None):
        self.word = word
        self.offset = offset
        where = f" at word {offset}" if offset is not None else ""
        super().__init__(f"illegal instruction 0x{word:08x}{where}: {reason}")


class QubitCountExceeded(IsaError):
    pass


class BadMagic(IsaError):
    pass


class TruncatedProgram(IsaError):
    pass


class InvalidProgram(IsaError):
    pass


@dataclass(frozen=True)
class EnvInit:
    size: int


@dataclass(frozen=True)
class MemLoad:
    mode: int
    result_sel: int
    qubit_mask: int

    @classmethod
    def single(cls, qubit: int, result: int | None = None) -> MemLoad:
        seg, bit = divmod(qubit, QUBIT_SEGMENT)
        lane = 0 if result is None else 1 << (LANE_SHIFT + result % RESULT_LANES)
        return cls(seg, lane, 1 << bit)

    @classmethod
    def pair(cls, control: int) -> MemLoad:
        seg, bit = divmod(control, QUBIT_SEGMENT)
        return cls(MODE_PAIR_BASE + seg, 0, 1 << bit)

    @classmethod
    def target_prefix(cls, target: int) -> MemLoad:
        seg, bit = divmod(target, QUBIT_SEGMENT)
        return cls(MODE_TARGET_PREFIX, 1 << seg, 1 << bit)

    @property
    def is_single(self) -> bool:
        return self.mode < MAX_SEGMENTS

    @property
    def is_pair(self) -> bool:
        return self.mode >= MODE_PAIR_BASE

    @property
    def is_target_prefix(self) -> bool:
        return self.mode == MODE_TARGET_PREFIX

    def addressed_qubits(self) -> list[int]:
        """Absolute qubit indices selected by the mask (single and pair modes)."""
        if self.is_target_prefix:
            base = _one_hot_index(self.result_sel) * QUBIT_SEGMENT
        elif self.is_pair:
            base = (self.mode - MODE_PAIR_BASE) * QUBIT_SEGMENT
        else:
            base = self.mode * QUBIT_SEGMENT
        return [base + i for i in range(QUBIT_SEGMENT) if self.qubit_mask >> i & 1]

    def result_lane(self) -> int | None:
        if not self.is_single or self.result_sel == 0:
            return None
        if self.result_sel & 0x0F:
            raise ValueError(f"result selector 0x{self.result_sel:02x} uses the reserved low nibble")
        return _one_hot_index(self.result_sel) - LANE_SHIFT


@dataclass(frozen=True)
class QuantumOp:
    gate_code: int
    operand: int = 0
    timing: int = DEFAULT_TIMING
    angle_index: int | None = None

    @property
    def gate(self) -> str:
        return GATE_NAMES[self.gate_code]


@dataclass(frozen=True)
class FetchResult:
    reg_sel: int
    segment: int = 0

    @classmethod
    def for_result(cls, result: int) -> FetchResult:
        seg, bit = divmod(result, QUBIT_SEGMENT)
        return cls(1 << bit, seg)

    @property
    def result(self) -> int:
        return self.segment * QUBIT_SEGMENT + _one_hot_index(self.reg_sel)


@dataclass(frozen=True)
class AtomPrep:
    kind: AtomPrepKind


@dataclass(frozen=True)
class Halt:
    pass


Instruction = EnvInit | MemLoad | QuantumOp | FetchResult | AtomPrep | Halt


def _one_hot_index(value: int) -> int:
    if value <= 0 or value & (value - 1):
        raise ValueError(f"0x{value:x} is not one-hot")
    return value.bit_length() - 1


def _check(value: int, bits: int, name: str) -> None:
    if not 0 <= value < (1 << bits):
        raise FieldOverflow(f"{name}={value} does not fit in {bits} bits")


# Raw word builders; lowering calls these directly to skip object construction.

def envinit_word(size: int) -> int:
    _check(size, 16, "size")
    return CLASS_ENVINIT << 28 | size


def memload_word(mode: int, result_sel: int, qubit_mask: int) -> int:
    _check(mode, 4, "mode")
    if mode == MAX_SEGMENTS:
        raise FieldOverflow("MemLoad mode 0111 is reserved")
    _check(result_sel, 8, "result_sel")
    _check(qubit_mask, 16, "qubit_mask")
    return CLASS_MEMLOAD << 28 | mode << 24 | result_sel << 16 | qubit_mask


def quantum_word(gate_code: int, operand: int, timing: int) -> int:
    if gate_code not in GATE_NAMES:
        raise FieldOverflow(f"undefined gate code {gate_code:#08b}")
    _check(operand, 16, "operand")
    _check(timing, 6, "timing")
    return CLASS_QUANTUM << 28 | gate_code << 22 | operand << 6 | timing


def fetch_word(reg_sel: int, segment: int) -> int:
    _check(reg_sel, 16, "reg_sel")
    _check(segment, 8, "segment")
    return CLASS_RESULT << 28 | RESULT_FETCH_LAST << 24 | segment << 16 | reg_sel


def atomprep_word(kind: AtomPrepKind) -> int:
    return CLASS_ATOMPREP << 28 | int(AtomPrepKind(kind)) << 24


HALT_WORD = 0


def encode(instr: Instruction) -> int:
    """Pack one instruction into its 32-bit word."""
    if isinstance(instr, QuantumOp):
        operand = instr.operand
        if instr.gate_code in ROTATION_CODES:
            if instr.angle_index is None:
                raise FieldOverflow("rotation gate needs an angle index")
            _check(instr.angle_index, 12, "angle_index")
            if operand & 0xFFF:
                raise FieldOverflow("operand[11:0] is taken by the angle index")
            operand |= instr.angle_index
        elif instr.angle_index is not None:
            raise FieldOverflow(f"{GATE_NAMES.get(instr.gate_code, '?')} takes no angle")
        return quantum_word(instr.gate_code, operand, instr.timing)
    if isinstance(instr, MemLoad):
        return memload_word(instr.mode, instr.result_sel, instr.qubit_mask)
    if isinstance(instr, FetchResult):
        return fetch_word(instr.reg_sel, instr.segment)
    if isinstance(instr, EnvInit):
        return envinit_word(instr.size)
    if isinstance(instr, AtomPrep):
        return atomprep_word(instr.kind)
    if isinstance(instr, Halt):
        return HALT_WORD
    raise TypeError(f"not an instruction: {instr!r}")


def decode(word: int) -> Instruction:
    """Inverse of :func:`encode`. Raises IllegalOpcode for undefined patterns."""
    if not 0 <= word <= 0xFFFFFFFF:
        raise IllegalOpcode(word & 0xFFFFFFFF, "not a 32-bit word")
    cls = word >> 28
    if cls == CLASS_QUANTUM:
        code = word >> 22 & 0x3F
        if code not in GATE_NAMES:
            raise IllegalOpcode(word, f"undefined gate code {code:06b}")
        operand = word >> 6 & 0xFFFF
        timing = word & 0x3F
        if code in ROTATION_CODES:
            return QuantumOp(code, operand & 0xF000, timing, operand & 0xFFF)
        return QuantumOp(code, operand, timing)
    if cls == CLASS_MEMLOAD:
        mode = word >> 24 & 0xF
        if mode == MAX_SEGMENTS:
            raise IllegalOpcode(word, "reserved MemLoad mode 0111")
        return MemLoad(mode, word >> 16 & 0xFF, word & 0xFFFF)
    if cls == CLASS_RESULT:
        sub = word >> 24 & 0xF
        if sub != RESULT_FETCH_LAST:
            raise IllegalOpcode(word, f"undefined result sub-op {sub:04b}")
        return FetchResult(word & 0xFFFF, word >> 16 & 0xFF)
    if cls == CLASS_ENVINIT:
        if word & 0x0FFF0000:
            raise IllegalOpcode(word, "EnvInit reserved bits set")
        return EnvInit(word & 0xFFFF)
    if cls == CLASS_ATOMPREP:
        sub = word >> 24 & 0xF
        if word & 0x00FFFFFF or sub not in AtomPrepKind._value2member_map_:
            raise IllegalOpcode(word, f"undefined atom-prep pattern {sub:04b}")
        return AtomPrep(AtomPrepKind(sub))
    if cls == CLASS_HALT:
        if word:
            raise IllegalOpcode(word, "nonzero Halt payload")
        return Halt()
    raise IllegalOpcode(word, f"undefined class {cls:04b}")


@dataclass(frozen=True)
class BinaryProgram:
    """Header, angle constant pool and instruction words of one offload image."""

    target: Target
    num_qubits: int
    num_results: int
    shots: int
    words: tuple[int, ...]
    angle_table: tuple[float, ...] = ()
    version: int = FORMAT_VERSION
    magic: bytes = field(default=MAGIC, repr=False)

    def instructions(self) -> list[Instruction]:
        out = []
        for i, w in enumerate(self.words):
            try:
                out.append(decode(w))
            except IllegalOpcode as exc:
                raise IllegalOpcode(w, str(exc), offset=i) from None
        return out


def _check_program(program: BinaryProgram) -> None:
    if program.num_qubits > MAX_QUBITS:
        raise QubitCountExceeded(
            f"{program.num_qubits} qubits requested; the 32-bit ISA addresses at most {MAX_QUBITS}")
    if not program.words:
        raise InvalidProgram("program has no instruction words")
    instrs = program.instructions()
    if not isinstance(instrs[0], EnvInit):
        raise InvalidProgram("first word must be EnvInit")
    if len(program.angle_table) > MAX_ANGLES:
        raise InvalidProgram(f"angle table holds {len(program.angle_table)} > {MAX_ANGLES} entries")
    for i, ins in enumerate(instrs):
        if isinstance(ins, QuantumOp) and ins.angle_index is not None:
            if ins.angle_index >= len(program.angle_table):
                raise InvalidProgram(f"word {i}: angle index {ins.angle_index} outside table")
    if program.shots < 1:
        raise InvalidProgram("shots must be >= 1")


def assemble(program: BinaryProgram) -> bytes:
    """Serialize a program to its little-endian shared-segment image."""
    _check_program(program)
    parts = [HEADER.pack(program.magic, program.version, int(program.target), 0,
                         program.num_qubits, program.num_results, program.shots,
                         len(program.angle_table), 0)]
    parts.append(struct.pack(f"<{len(program.angle_table)}d", *program.angle_table))
    parts.append(WORD_COUNT.pack(len(program.words)))
    parts.append(struct.pack(f"<{len(program.words)}I", *program.words))
    return b"".join(parts)


def load_image(data: bytes) -> BinaryProgram:
    """Parse an offload image back into a :class:`BinaryProgram`."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {bytes(data[:4])!r}")
    if len(data) < HEADER.size:
        raise TruncatedProgram("image shorter than its header")
    magic, version, target, _pad, nq, nr, shots, n_angles, _pad2 = HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise InvalidProgram(f"unsupported image version {version}")
    if target not in Target._value2member_map_:
        raise InvalidProgram(f"unknown target code {target}")
    off = HEADER.size
    if len(data) < off + 8 * n_angles + WORD_COUNT.size:
        raise TruncatedProgram("image ends inside the angle table or word count")
    angles = struct.unpack_from(f"<{n_angles}d", data, off)
    off += 8 * n_angles
    (n_words,) = WORD_COUNT.unpack_from(data, off)
    off += WORD_COUNT.size
    if len(data) < off + 4 * n_words:
        raise TruncatedProgram(f"image declares {n_words} words but holds {(len(data) - off) // 4}")
    if len(data) > off + 4 * n_words:
        raise InvalidProgram(f"{len(data) - off - 4 * n_words} trailing bytes after the last word")
    words = struct.unpack_from(f"<{n_words}I", data, off)
    program = BinaryProgram(Target(target), nq, nr, shots, tuple(words), tuple(angles),
                            version, magic)
    _check_program(program)
    return program


_ORDINALS = ["First", "Second", "Third", "Fourth", "Fifth",
             "Sixth", "Seventh", "Eighth", "Ninth", "Tenth"]

_GATE_TITLES = {
    "h": "Hadamard", "x": "Pauli-X", "y": "Pauli-Y", "z": "Pauli-Z", "s": "S phase",
    "t": "T phase", "sx": "Square-root-X", "reset": "Reset", "rx": "RX rotation",
    "ry": "RY rotation", "rz": "RZ rotation", "cnot": "CNOT", "cz": "CZ", "swap": "SWAP",
}

_ATOM_TITLES = {
    AtomPrepKind.IMAGE_FETCH: ("ATOM.IMAGE", "Image fetch: acquire the atom image"),
    AtomPrepKind.ATOM_DETECT: ("ATOM.DETECT", "Atom detection: positions and occupancy"),
    AtomPrepKind.ATOM_SORT: ("ATOM.SORT", "Atom sorting: plan the defect-free rearrangement"),
    AtomPrepKind.ATOM_MOVE: ("ATOM.MOVE", "Atom moving: send control signals"),
}


def _describe(instrs: list[Instruction], angles: tuple[float, ...]) -> list[tuple[str, str]]:
    # Tracks the address registers so mnemonics can name absolute qubits.
    rows = []
    addressed: list[int] = []
    pair: tuple[int, int] | None = None
    pending_target: int | None = None
    for ins in instrs:
        if isinstance(ins, EnvInit):
            rows.append((f"ENVINIT size={ins.size}", "Execution environment initialization"))
        elif isinstance(ins, MemLoad):
            try:
                qubits = ins.addressed_qubits()
            except ValueError:
                qubits = []
            if ins.is_target_prefix:
                pending_target = qubits[0] if len(qubits) == 1 else None
                rows.append((f"MEMLD.T t={pending_target}", "Memory instruction (pair target)"))
                continue
            if ins.is_pair:
                c = qubits[0] if len(qubits) == 1 else None
                t = pending_target if pending_target is not None else (None if c is None else c + 1)
                pair = (c, t)
                addressed = [q for q in (c, t) if q is not None]
                pending_target = None
                rows.append((f"MEMLD.P c={c} t={t}", "Memory instruction"))
                continue
            addressed, pending_target = qubits, None
            qs = ",".join(map(str, qubits))
            try:
                lane = ins.result_lane()
            except ValueError:
                lane = None
            tail = f" lane={lane}" if lane is not None else ""
            rows.append((f"MEMLD.S q={qs}{tail}", "Memory instruction"))
        elif isinstance(ins, QuantumOp):
            name = ins.gate
            mnem = f"QOP {name}"
            if ins.angle_index is not None:
                ang = angles[ins.angle_index] if ins.angle_index < len(angles) else float("nan")
                mnem += f" a#{ins.angle_index}={ang:.6g}"
            mnem += f" t={ins.timing}"
            if name == "mz":
                q = addressed[0] if len(addressed) == 1 else None
                if q is not None and q < len(_ORDINALS):
                    note = f"{_ORDINALS[q]} qubit measurement operation"
                else:
                    note = f"Qubit {q} measurement operation"
            elif name in TWO_QUBIT_GATES:
                note = f"{_GATE_TITLES[name]} operation"
                if pair != (0, 1) and pair is not None:
                    note += f" on ({pair[0]}, {pair[1]})"
            else:
                note = f"{_GATE_TITLES[name]} operation"
            rows.append((mnem, note))
        elif isinstance(ins, FetchResult):
            try:
                mnem = f"FETCH r={ins.result}"
            except ValueError:
                mnem = f"FETCH sel=0x{ins.reg_sel:04x} seg={ins.segment}"
            rows.append((mnem, "Fetch last measurement"))
        elif isinstance(ins, AtomPrep):
            rows.append(_ATOM_TITLES[ins.kind])
        else:
            rows.append(("HALT", "Halt (end of program, artifact plumbing)"))
    return rows


def listing(program: BinaryProgram) -> str:
    """Two-column text listing: binary word, mnemonic and annotation per line."""
    instrs = program.instructions()
    rows = _describe(instrs, program.angle_table)
    return "\n".join(f"{w:032b}  {m}  ; {a}" for w, (m, a) in zip(program.words, rows))


def disassemble(data: bytes) -> tuple[str, BinaryProgram]:
    program = load_image(data)
    return listing(program), program
