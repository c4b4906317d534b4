"""Pure-numpy shot replay. Reference route for the compiled ``_replay`` kernel."""

from __future__ import annotations

import numpy as np

from . import statevector as sv

OP_U1, OP_CX, OP_CZ, OP_SWAP, OP_MEASURE, OP_RESET, OP_FETCH = range(7)


def replay_shots(ops: np.ndarray, mats: np.ndarray, num_qubits: int, num_results: int,
                 uniforms: np.ndarray) -> np.ndarray:
    """Run every shot of a fixed op table and return the result registers.

    ``ops`` rows are ``(kind, a, b, matrix_index)``; ``uniforms[s, k]`` drives the
    k-th measurement or reset of shot ``s``.
    """
    shots = uniforms.shape[0]
    out = np.zeros((shots, num_results), dtype=np.uint8)
    rows = [tuple(int(x) for x in row) for row in ops]
    # unitaries before the first measurement, reset or fetch act identically in every shot
    prefix = next((i for i, r in enumerate(rows) if r[0] in (OP_MEASURE, OP_RESET, OP_FETCH)), len(rows))
    init = sv.zero_state(num_qubits)
    for kind, a, b, m in rows[:prefix]:
        init = _unitary(init, kind, a, b, m, mats)
    tail = rows[prefix:]
    for s in range(shots):
        state = init
        draw = 0
        latch = 0
        regs = out[s]
        for kind, a, b, m in tail:
            if kind == OP_MEASURE:
                latch, state = sv.measure(state, a, uniforms[s, draw])
                draw += 1
            elif kind == OP_RESET:
                state = sv.reset(state, a, uniforms[s, draw])
                draw += 1
            elif kind == OP_FETCH:
                regs[a] = latch
            else:
                state = _unitary(state, kind, a, b, m, mats)
    return out


def _unitary(state: np.ndarray, kind: int, a: int, b: int, m: int, mats: np.ndarray) -> np.ndarray:
    if kind == OP_U1:
        return sv.apply_matrix(state, mats[m], a)
    if kind == OP_CX:
        return sv.apply_cx(state, a, b)
    if kind == OP_CZ:
        return sv.apply_cz(state, a, b)
    if kind == OP_SWAP:
        return sv.apply_swap(state, a, b)
    raise ValueError(f"unknown op kind {kind}")
