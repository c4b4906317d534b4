"""Parser and validator for the QIR base-profile text format.

Only the linear subset is understood: type and global declarations, ``declare``
lines, a single entry ``define`` whose body is straight-line ``call void``
instructions ending in ``ret void``, and attribute groups. Anything that
introduces control flow or dynamic allocation is rejected.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

from .isa import ROTATION_GATES, TWO_QUBIT_GATES


class QirError(Exception):
    """Diagnostic carrying a 1-based source position when one is known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        loc = f"{line}:{column}: " if line is not None else ""
        super().__init__(f"{loc}{message}")


class QirSyntaxError(QirError):
    pass


class UnsupportedConstruct(QirError):
    pass


class MissingAttribute(QirError):
    pass


class ValidationError(QirError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class UnknownGate(ValidationError):
    pass


class RecordBeforeMeasure(ValidationError):
    pass


class DuplicateOperand(ValidationError):
    pass


@dataclass(frozen=True)
class Gate1Q:
    gate_name: str
    qubit: int


@dataclass(frozen=True)
class Gate1QAngle:
    gate_name: str
    qubit: int
    angle: float


@dataclass(frozen=True)
class Gate2Q:
    gate_name: str
    control: int
    target: int


@dataclass(frozen=True)
class Measure:
    qubit: int
    result: int


@dataclass(frozen=True)
class ResultRecord:
    result: int


KernelOp = Gate1Q | Gate1QAngle | Gate2Q | Measure | ResultRecord


@dataclass(frozen=True)
class KernelMetadata:
    num_qubits: int
    num_results: int
    source_attributes: dict[str, str] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class QirModule:
    entry_name: str
    ops: tuple[KernelOp, ...]
    metadata: KernelMetadata
    declared_intrinsics: frozenset[str]


@dataclass(frozen=True)
class QuantumKernel:
    """A validated base-profile kernel ready for lowering."""

    entry_name: str
    num_qubits: int
    num_results: int
    ops: tuple[KernelOp, ...]

    @property
    def recorded_results(self) -> tuple[int, ...]:
        return tuple(op.result for op in self.ops if isinstance(op, ResultRecord))

    @property
    def gate_count(self) -> int:
        return sum(1 for op in self.ops if not isinstance(op, ResultRecord))


QUBIT_ATTRS = ("required_num_qubits", "num_required_qubits")
RESULT_ATTRS = ("required_num_results", "num_required_results")

SINGLE_QUBIT_GATES = frozenset({"h", "x", "y", "z", "s", "t", "sx", "reset"})
GATE_ALIASES = {"cx": "cnot"}

# Runtime calls that carry no quantum semantics for a static base-profile kernel.
_BOOKKEEPING = frozenset({
    "__quantum__rt__initialize",
    "__quantum__rt__array_record_output",
    "__quantum__rt__tuple_record_output",
})
_RECORD = "__quantum__rt__result_record_output"

_UNSUPPORTED_KEYWORDS = frozenset({
    "br", "switch", "indirectbr", "phi", "select", "icmp", "fcmp", "alloca", "load",
    "store", "getelementptr", "invoke", "unreachable", "add", "sub", "mul", "and", "or",
    "xor", "shl", "lshr", "ashr", "fadd", "fsub", "fmul", "fdiv", "zext", "sext", "trunc",
    "bitcast", "inttoptr", "ptrtoint", "extractvalue", "insertvalue",
})

_DEFINE_RE = re.compile(r"define\s+(?:\w+\s+)*?void\s+@(?P<name>[\w.$\"]+)\s*\((?P<params>[^)]*)\)(?P<rest>[^{]*)\{\s*$")
_DECLARE_RE = re.compile(r"declare\s+.*?@(?P<name>[\w.$]+)\s*\(")
_CALL_RE = re.compile(r"(?:tail\s+|musttail\s+|notail\s+)?call\s+void\s+@(?P<name>[\w.$]+)\s*\(")
_ATTR_GROUP_RE = re.compile(r"attributes\s+#(?P<id>\d+)\s*=\s*\{(?P<body>.*)\}\s*$")
_ATTR_ITEM_RE = re.compile(r'"(?P<key>[^"]*)"(?:\s*=\s*"(?P<value>[^"]*)")?|(?P<bare>[A-Za-z_][\w]*)')
_LABEL_RE = re.compile(r"[\w.$\"-]+:")
_INTTOPTR_RE = re.compile(r"inttoptr\s*\(\s*i64\s+(?P<n>-?\d+)\s+to\s+(?P<ty>%\w+\*|ptr)\s*\)$")
_QIS_RE = re.compile(r"__quantum__qis__(?P<gate>[a-z0-9_]+?)__(?P<variant>body|adj|ctl)$")


def _strip_comment(line: str) -> str:
    # Comments start at ';' outside string literals.
    in_str = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_str = not in_str
        elif ch == ";" and not in_str:
            return line[:i]
    return line


def _split_args(text: str, line: int, col: int) -> list[tuple[str, int]]:
    args, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "([{<":
            depth += 1
        elif ch in ")]}>":
            depth -= 1
            if depth < 0:
                raise QirSyntaxError("unbalanced parenthesis", line, col + i)
        elif ch == "," and depth == 0:
            args.append((text[start:i], col + start))
            start = i + 1
    if depth:
        raise QirSyntaxError("unbalanced parenthesis", line, col + len(text))
    tail = text[start:]
    if tail.strip() or args:
        args.append((tail, col + start))
    return [(a.strip(), c + len(a) - len(a.lstrip())) for a, c in args]


def _matching_paren(text: str, open_idx: int) -> int:
    depth = 0
    for i in range(open_idx, len(text)):
        if text[i] == "(":
            depth += 1
        elif text[i] == ")":
            depth -= 1
            if depth == 0:
                return i
    return -1


def _parse_pointer(arg: str, line: int, col: int) -> int:
    if arg.startswith("%Qubit*") or arg.startswith("%Result*"):
        value = arg.split("*", 1)[1].strip()
    elif arg.startswith("ptr"):
        value = arg[3:].strip()
    else:
        raise QirSyntaxError(f"expected a qubit or result pointer, found {arg!r}", line, col)
    if value == "null":
        return 0
    m = _INTTOPTR_RE.match(value)
    if m:
        n = int(m.group("n"))
        if n < 0:
            raise QirSyntaxError(f"negative register index {n}", line, col)
        return n
    if value.startswith("%"):
        raise UnsupportedConstruct(
            f"dynamic operand {value!r}; only static null/inttoptr operands are allowed", line, col)
    raise QirSyntaxError(f"malformed pointer literal {value!r}", line, col)


def _parse_double(arg: str, line: int, col: int) -> float:
    if not arg.startswith("double"):
        raise QirSyntaxError(f"expected a double operand, found {arg!r}", line, col)
    lit = arg[len("double"):].strip()
    try:
        if lit.lower().startswith("0x"):
            # LLVM prints doubles that lack an exact short decimal form as IEEE bit patterns.
            return struct.unpack("<d", int(lit[2:], 16).to_bytes(8, "little"))[0]
        return float(lit)
    except (ValueError, OverflowError):
        raise QirSyntaxError(f"malformed floating-point literal {lit!r}", line, col) from None


def _ptr_at(arg: tuple[str, int], line: int) -> int:
    return _parse_pointer(arg[0], line, arg[1])


def _pointer_type(arg: str) -> str | None:
    if arg.startswith("%Qubit*"):
        return "qubit"
    if arg.startswith("%Result*"):
        return "result"
    if arg.startswith("ptr"):
        return "ptr"
    return None


def _classify_call(name: str, args: list[tuple[str, int]], line: int, col: int) -> KernelOp | None:
    if name in _BOOKKEEPING:
        return None
    if name == _RECORD:
        if not args:
            raise QirSyntaxError("result_record_output needs a result operand", line, col)
        a, c = args[0]
        if _pointer_type(a) not in ("result", "ptr"):
            raise QirSyntaxError(f"expected a result pointer, found {a!r}", line, c)
        return ResultRecord(_parse_pointer(a, line, c))
    if name.startswith("__quantum__rt__"):
        raise UnsupportedConstruct(f"runtime call {name} is outside the base profile subset", line, col)
    m = _QIS_RE.match(name)
    if not m:
        raise UnsupportedConstruct(f"unknown intrinsic {name}", line, col)
    gate, variant = m.group("gate"), m.group("variant")
    if variant == "ctl":
        raise UnsupportedConstruct(f"controlled specialization {name} is not supported", line, col)
    if variant == "adj":
        gate = f"{gate}_adj"
    kinds = [_pointer_type(a) for a, _ in args]
    if gate == "mz":
        if len(args) != 2 or None in kinds or kinds[0] == "result" or kinds[1] == "qubit":
            raise QirSyntaxError("mz takes (qubit, result)", line, col)
        return Measure(_ptr_at(args[0], line), _ptr_at(args[1], line))
    if "result" in kinds:
        raise UnsupportedConstruct(f"{name} takes a result operand; only mz may", line, col)
    if len(args) == 2 and args[0][0].startswith("double") and kinds[1] in ("qubit", "ptr"):
        return Gate1QAngle(gate, _ptr_at(args[1], line), _parse_double(args[0][0], line, args[0][1]))
    if None in kinds:
        bad = next(a for a, _ in args if _pointer_type(a) is None)
        raise UnsupportedConstruct(f"{name}: unsupported operand {bad!r}", line, col)
    if len(args) == 1:
        return Gate1Q(gate, _ptr_at(args[0], line))
    if len(args) == 2:
        return Gate2Q(gate, _ptr_at(args[0], line), _ptr_at(args[1], line))
    raise UnsupportedConstruct(f"{name}: {len(args)}-operand gates are not supported", line, col)


def _parse_attributes(body: str) -> dict[str, str]:
    attrs: dict[str, str] = {}
    for m in _ATTR_ITEM_RE.finditer(body):
        if m.group("key") is not None:
            attrs[m.group("key")] = m.group("value") if m.group("value") is not None else ""
        elif m.group("bare"):
            attrs[m.group("bare")] = ""
    return attrs


def parse_qir(text: str) -> QirModule:
    """Parse base-profile QIR text into a :class:`QirModule`."""
    declared: set[str] = set()
    groups: dict[str, dict[str, str]] = {}
    entries: list[tuple[str, str, int]] = []  # name, attribute reference text, line
    calls: list[tuple[str, int, int]] = []
    ops: list[KernelOp] = []
    in_body = False
    returned = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        col = len(line) - len(line.lstrip()) + 1

        if in_body:
            if stripped == "}":
                if not returned:
                    raise QirSyntaxError("entry function does not end with 'ret void'", lineno, col)
                in_body = False
                continue
            if returned:
                raise UnsupportedConstruct("instructions after 'ret' (multiple blocks)", lineno, col)
            if _LABEL_RE.fullmatch(stripped):
                if ops or calls:
                    raise UnsupportedConstruct("additional basic block; control flow is not allowed",
                                               lineno, col)
                continue
            if stripped == "ret void":
                returned = True
                continue
            m = _CALL_RE.match(stripped)
            if m:
                open_idx = stripped.index("(", m.end() - 1)
                close_idx = _matching_paren(stripped, open_idx)
                if close_idx < 0:
                    raise QirSyntaxError("unterminated call argument list", lineno, col + len(stripped))
                trailer = stripped[close_idx + 1:].strip()
                if trailer and not re.fullmatch(r"(#\d+\s*)*", trailer):
                    raise QirSyntaxError(f"unexpected text after call: {trailer!r}",
                                         lineno, col + close_idx + 1)
                args = _split_args(stripped[open_idx + 1:close_idx], lineno, col + open_idx + 1)
                name = m.group("name")
                calls.append((name, lineno, col))
                op = _classify_call(name, args, lineno, col)
                if op is not None:
                    ops.append(op)
                continue
            head = stripped.split("=", 1)[-1].split() if stripped.startswith("%") else stripped.split()
            keyword = head[0] if head else ""
            if keyword in _UNSUPPORTED_KEYWORDS or keyword in ("call", "tail") or keyword.startswith("ret"):
                raise UnsupportedConstruct(
                    f"'{keyword}' is outside the base-profile subset (linear call sequences only)",
                    lineno, col)
            raise QirSyntaxError(f"unrecognized instruction {stripped!r}", lineno, col)

        if stripped.startswith("define"):
            m = _DEFINE_RE.match(stripped)
            if not m:
                raise QirSyntaxError("malformed define; expected 'define void @name() #N {'", lineno, col)
            if m.group("params").strip():
                raise UnsupportedConstruct("entry point must not take parameters", lineno, col)
            entries.append((m.group("name").strip('"'), m.group("rest"), lineno))
            in_body, returned = True, False
            continue
        if stripped.startswith("declare"):
            m = _DECLARE_RE.match(stripped)
            if not m:
                raise QirSyntaxError("malformed declare", lineno, col)
            declared.add(m.group("name"))
            continue
        if stripped.startswith("attributes"):
            m = _ATTR_GROUP_RE.match(stripped)
            if not m:
                raise QirSyntaxError("malformed attribute group", lineno, col)
            groups[m.group("id")] = _parse_attributes(m.group("body"))
            continue
        if (stripped.startswith(("source_filename", "target ", "!"))
                or re.match(r"%[\w.]+\s*=\s*type\b", stripped)
                or re.match(r"@[\w.$]+\s*=", stripped)):
            continue
        raise QirSyntaxError(f"unexpected top-level text {stripped!r}", lineno, col)

    if in_body:
        raise QirSyntaxError("unterminated function body", len(text.splitlines()) or 1, 1)
    if not entries:
        raise QirSyntaxError("no entry-point function defined", 1, 1)
    if len(entries) > 1:
        raise UnsupportedConstruct(f"{len(entries)} function definitions; exactly one entry point allowed",
                                   entries[1][2], 1)
    for name, lineno, col in calls:
        if name not in declared:
            raise QirSyntaxError(f"call to undeclared function @{name}", lineno, col)

    entry_name, rest, def_line = entries[0]
    attrs: dict[str, str] = {}
    for ref in re.findall(r"#(\d+)", rest):
        if ref not in groups:
            raise QirSyntaxError(f"attribute group #{ref} is not defined", def_line, 1)
        attrs.update(groups[ref])
    attrs.update(_parse_attributes(re.sub(r"#\d+", "", rest)))

    def _count(keys: tuple[str, ...]) -> int:
        for k in keys:
            if k in attrs:
                try:
                    n = int(attrs[k])
                except ValueError:
                    raise QirSyntaxError(f"attribute {k}={attrs[k]!r} is not an integer", def_line, 1) from None
                if n < 0:
                    raise QirSyntaxError(f"attribute {k} is negative", def_line, 1)
                return n
        raise MissingAttribute(f"entry point lacks the {keys[0]} attribute", def_line, 1)

    meta = KernelMetadata(_count(QUBIT_ATTRS), _count(RESULT_ATTRS), attrs)
    return QirModule(entry_name, tuple(ops), meta, frozenset(declared))


def validate(module: QirModule) -> QuantumKernel:
    """Check register bounds, gate names and measure-before-record ordering."""
    nq, nr = module.metadata.num_qubits, module.metadata.num_results
    measured: set[int] = set()
    ops: list[KernelOp] = []

    def qubit(i: int, pos: int) -> None:
        if i >= nq:
            raise IndexOutOfRange(f"op {pos}: qubit {i} outside register of {nq}")

    def result(i: int, pos: int) -> None:
        if i >= nr:
            raise IndexOutOfRange(f"op {pos}: result {i} outside register of {nr}")

    for pos, op in enumerate(module.ops):
        if isinstance(op, Gate1Q):
            name = GATE_ALIASES.get(op.gate_name, op.gate_name)
            if name not in SINGLE_QUBIT_GATES:
                raise UnknownGate(f"op {pos}: '{op.gate_name}' is not a supported single-qubit gate")
            qubit(op.qubit, pos)
            op = Gate1Q(name, op.qubit)
        elif isinstance(op, Gate1QAngle):
            if op.gate_name not in ROTATION_GATES:
                raise UnknownGate(f"op {pos}: '{op.gate_name}' is not a supported rotation")
            qubit(op.qubit, pos)
        elif isinstance(op, Gate2Q):
            name = GATE_ALIASES.get(op.gate_name, op.gate_name)
            if name not in TWO_QUBIT_GATES:
                raise UnknownGate(f"op {pos}: '{op.gate_name}' is not a supported two-qubit gate")
            qubit(op.control, pos)
            qubit(op.target, pos)
            if op.control == op.target:
                raise DuplicateOperand(f"op {pos}: control and target are both qubit {op.control}")
            op = Gate2Q(name, op.control, op.target)
        elif isinstance(op, Measure):
            qubit(op.qubit, pos)
            result(op.result, pos)
            measured.add(op.result)
        elif isinstance(op, ResultRecord):
            result(op.result, pos)
            if op.result not in measured:
                raise RecordBeforeMeasure(f"op {pos}: result {op.result} recorded before any measurement")
        ops.append(op)
    return QuantumKernel(module.entry_name, nq, nr, tuple(ops))


def _ptr(kind: str, index: int) -> str:
    if index == 0:
        return f"%{kind}* null"
    return f"%{kind}* inttoptr (i64 {index} to %{kind}*)"


def _callee(op: KernelOp) -> str:
    if isinstance(op, Measure):
        return "__quantum__qis__mz__body"
    if isinstance(op, ResultRecord):
        return _RECORD
    name = op.gate_name
    if name.endswith("_adj"):
        return f"__quantum__qis__{name[:-4]}__adj"
    return f"__quantum__qis__{name}__body"


def _signature(op: KernelOp) -> str:
    if isinstance(op, Gate1Q):
        return "%Qubit*"
    if isinstance(op, Gate1QAngle):
        return "double, %Qubit*"
    if isinstance(op, Gate2Q):
        return "%Qubit*, %Qubit*"
    if isinstance(op, Measure):
        return "%Qubit*, %Result* writeonly"
    return "%Result*, i8*"


def _call(op: KernelOp) -> str:
    if isinstance(op, Gate1Q):
        args = _ptr("Qubit", op.qubit)
    elif isinstance(op, Gate1QAngle):
        args = f"double {op.angle!r}, {_ptr('Qubit', op.qubit)}"
    elif isinstance(op, Gate2Q):
        args = f"{_ptr('Qubit', op.control)}, {_ptr('Qubit', op.target)}"
    elif isinstance(op, Measure):
        args = f"{_ptr('Qubit', op.qubit)}, {_ptr('Result', op.result)}"
    else:
        args = f"{_ptr('Result', op.result)}, i8* null"
    return f"  call void @{_callee(op)}({args})"


def format_qir(module: QirModule | QuantumKernel) -> str:
    """Render a module or kernel as base-profile QIR text that :func:`parse_qir` accepts."""
    if isinstance(module, QuantumKernel):
        name, ops = module.entry_name, module.ops
        nq, nr = module.num_qubits, module.num_results
    else:
        name, ops = module.entry_name, module.ops
        nq, nr = module.metadata.num_qubits, module.metadata.num_results
    lines = [
        f"; ModuleID = '{name}'",
        f'source_filename = "{name}"',
        "",
        "%Qubit = type opaque",
        "%Result = type opaque",
        "",
        f"define void @{name}() #0 {{",
        "entry:",
        *(_call(op) for op in ops),
        "  ret void",
        "}",
        "",
    ]
    seen: dict[str, str] = {}
    for op in ops:
        seen.setdefault(_callee(op), _signature(op))
    lines += [f"declare void @{n}({sig})" for n, sig in seen.items()]
    lines += [
        "",
        f'attributes #0 = {{ "entry_point" "output_labeling_schema" "qir_profiles"="base_profile" '
        f'"required_num_qubits"="{nq}" "required_num_results"="{nr}" }}',
        "",
    ]
    return "\n".join(lines)
