import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uqp import statevector as sv
from uqp.isa import GATE_CODES

from oracles import H, X, controlled, embed, rz


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("q", [0, 1, 2])
def test_single_qubit_matches_kron(q):
    psi = random_state(3, q)
    got = sv.apply_matrix(psi, sv.gate_matrix("h"), q)
    assert np.allclose(got, embed({q: H}, 3) @ psi)


@pytest.mark.parametrize("c, t", [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2)])
def test_cx_matches_kron(c, t):
    psi = random_state(3, 10 + c * 3 + t)
    assert np.allclose(sv.apply_cx(psi, c, t), controlled(X, c, t, 3) @ psi)


def test_cz_and_swap_are_involutions():
    psi = random_state(4, 3)
    assert np.allclose(sv.apply_cz(sv.apply_cz(psi, 0, 3), 0, 3), psi)
    assert np.allclose(sv.apply_swap(sv.apply_swap(psi, 1, 2), 1, 2), psi)
    swapped = sv.apply_swap(psi, 0, 1)
    ref = controlled(X, 0, 1, 4) @ controlled(X, 1, 0, 4) @ controlled(X, 0, 1, 4) @ psi
    assert np.allclose(swapped, ref)


def test_h_and_cnot_are_self_inverse():
    psi = random_state(2, 5)
    assert np.allclose(sv.apply_matrix(sv.apply_matrix(psi, sv.gate_matrix("h"), 1), sv.gate_matrix("h"), 1), psi)
    assert np.allclose(sv.apply_cx(sv.apply_cx(psi, 0, 1), 0, 1), psi)


def test_rotation_inverse_and_reference():
    psi = random_state(2, 6)
    a = 0.731
    there = sv.apply_matrix(psi, sv.gate_matrix("rz", a), 0)
    assert np.allclose(there, embed({0: rz(a)}, 2) @ psi)
    assert np.allclose(sv.apply_matrix(there, sv.gate_matrix("rz", -a), 0), psi)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000), st.sampled_from(["h", "x", "y", "z", "s", "t", "sx"]))
def test_unitaries_preserve_norm(n, seed, gate):
    psi = random_state(n, seed)
    q = seed % n
    out = sv.apply_gate(psi, GATE_CODES[gate], (q,))
    assert math.isclose(np.linalg.norm(out), 1.0, rel_tol=1e-12)


def test_measure_projects():
    psi = sv.apply_matrix(sv.zero_state(1), sv.gate_matrix("h"), 0)
    assert math.isclose(sv.prob_zero(psi, 0), 0.5)
    bit, post = sv.measure(psi, 0, 0.49)
    assert bit == 0 and np.allclose(post, [1, 0])
    bit, post = sv.measure(psi, 0, 0.51)
    assert bit == 1 and np.allclose(post, [0, 1])


def test_reset_returns_zero():
    psi = sv.apply_matrix(sv.zero_state(2), sv.gate_matrix("x"), 1)
    assert np.allclose(sv.reset(psi, 1, 0.3), sv.zero_state(2))


def test_limits_and_errors():
    with pytest.raises(sv.TooManyQubits):
        sv.zero_state(21)
    psi = sv.zero_state(2)
    with pytest.raises(ValueError):
        sv.apply_gate(psi, GATE_CODES["mz"], (0,))
    with pytest.raises(ValueError):
        sv.apply_gate(psi, GATE_CODES["cnot"], (0, 0))
    with pytest.raises(ValueError):
        sv.gate_matrix("rz")
