"""Dense state-vector backend used by the control-processor simulator.

Amplitude index bit ``q`` holds qubit ``q`` (qubit 0 is the least significant bit).
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .isa import GATE_CODES, GATE_NAMES, STATEVECTOR_LIMIT


class TooManyQubits(Exception):
    pass


_S2 = 1 / math.sqrt(2)
FIXED_MATRICES: dict[str, np.ndarray] = {
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "t": np.array([[1, 0], [0, cmath.exp(1j * math.pi / 4)]], dtype=complex),
    "sx": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
}


def gate_matrix(name: str, angle: float | None = None) -> np.ndarray:
    """2x2 unitary of a single-qubit gate."""
    if name in FIXED_MATRICES:
        return FIXED_MATRICES[name]
    if angle is None:
        raise ValueError(f"{name} needs an angle")
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if name == "rx":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if name == "ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if name == "rz":
        return np.array([[cmath.exp(-0.5j * angle), 0], [0, cmath.exp(0.5j * angle)]], dtype=complex)
    raise ValueError(f"no matrix for gate {name!r}")


def zero_state(num_qubits: int) -> np.ndarray:
    if num_qubits > STATEVECTOR_LIMIT:
        raise TooManyQubits(f"{num_qubits} qubits exceeds the {STATEVECTOR_LIMIT}-qubit state-vector cap")
    state = np.zeros(1 << num_qubits, dtype=complex)
    state[0] = 1.0
    return state


def num_qubits_of(state: np.ndarray) -> int:
    n = state.size.bit_length() - 1
    if state.size != 1 << n:
        raise ValueError("state length is not a power of two")
    if n > STATEVECTOR_LIMIT:
        raise TooManyQubits(f"{n} qubits exceeds the {STATEVECTOR_LIMIT}-qubit state-vector cap")
    return n


def apply_matrix(state: np.ndarray, matrix: np.ndarray, qubit: int) -> np.ndarray:
    view = state.reshape(-1, 2, 1 << qubit)
    return np.einsum("ab,ibj->iaj", matrix, view).reshape(-1)


def apply_cx(state: np.ndarray, control: int, target: int) -> np.ndarray:
    n = num_qubits_of(state)
    view = state.reshape((2,) * n)
    out = view.copy()
    c_axis, t_axis = n - 1 - control, n - 1 - target
    sel = [slice(None)] * n
    sel[c_axis] = 1
    sel = tuple(sel)
    out[sel] = np.flip(view[sel], axis=t_axis - (t_axis > c_axis))
    return out.reshape(-1)


def apply_cz(state: np.ndarray, a: int, b: int) -> np.ndarray:
    idx = np.arange(state.size)
    out = state.copy()
    out[(idx >> a & 1) & (idx >> b & 1) == 1] *= -1
    return out


def apply_swap(state: np.ndarray, a: int, b: int) -> np.ndarray:
    n = num_qubits_of(state)
    return state.reshape((2,) * n).swapaxes(n - 1 - a, n - 1 - b).reshape(-1).copy()


def prob_zero(state: np.ndarray, qubit: int) -> float:
    view = state.reshape(-1, 2, 1 << qubit)[:, 0, :]
    return float(np.sum(view.real ** 2 + view.imag ** 2))


def measure(state: np.ndarray, qubit: int, u: float) -> tuple[int, np.ndarray]:
    """Projective Z measurement driven by a uniform draw ``u``: outcome 0 iff u < P(0)."""
    p0 = prob_zero(state, qubit)
    bit = 0 if u < p0 else 1
    p = p0 if bit == 0 else 1.0 - p0
    view = state.reshape(-1, 2, 1 << qubit).copy()
    view[:, 1 - bit, :] = 0
    view /= math.sqrt(p)
    return bit, view.reshape(-1)


def reset(state: np.ndarray, qubit: int, u: float) -> np.ndarray:
    bit, state = measure(state, qubit, u)
    if bit:
        state = apply_matrix(state, FIXED_MATRICES["x"], qubit)
    return state


def apply_gate(state: np.ndarray, gate_code: int, targets: tuple[int, ...] | list[int],
               angle: float | None = None) -> np.ndarray:
    """Apply the unitary named by ``gate_code`` to ``targets`` and return the new state."""
    n = num_qubits_of(state)
    name = GATE_NAMES.get(gate_code)
    if name is None:
        raise ValueError(f"undefined gate code {gate_code}")
    if name in ("mz", "reset"):
        raise ValueError(f"{name} is not unitary; use measure() or reset()")
    targets = tuple(targets)
    if len(set(targets)) != len(targets) or any(not 0 <= q < n for q in targets):
        raise ValueError(f"targets {targets} invalid for a {n}-qubit register")
    if gate_code == GATE_CODES["cnot"]:
        return apply_cx(state, *targets)
    if gate_code == GATE_CODES["cz"]:
        return apply_cz(state, *targets)
    if gate_code == GATE_CODES["swap"]:
        return apply_swap(state, *targets)
    (q,) = targets
    return apply_matrix(state, gate_matrix(name, angle), q)
