# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled shot replay; same contract as ``uqp._replay_py.replay_shots``.

The state is held as interleaved (re, im) doubles and complex products are
written out by hand: C99 complex multiplication goes through ``__muldc3`` for
its inf/nan rules, which costs several times the arithmetic itself.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.string cimport memcpy

cnp.import_array()

cdef enum:
    OP_U1 = 0
    OP_CX = 1
    OP_CZ = 2
    OP_SWAP = 3
    OP_MEASURE = 4
    OP_RESET = 5
    OP_FETCH = 6


cdef void _u1(double* st, Py_ssize_t dim, Py_ssize_t q, const double* m) noexcept nogil:
    # m = [re00, im00, re01, im01, re10, im10, re11, im11]
    cdef Py_ssize_t stride = 1 << q, i = 0, j, lo, hi
    cdef double ar, ai, br, bi
    while i < dim:
        for j in range(i, i + stride):
            lo = 2 * j
            hi = 2 * (j + stride)
            ar = st[lo]
            ai = st[lo + 1]
            br = st[hi]
            bi = st[hi + 1]
            st[lo] = m[0] * ar - m[1] * ai + m[2] * br - m[3] * bi
            st[lo + 1] = m[0] * ai + m[1] * ar + m[2] * bi + m[3] * br
            st[hi] = m[4] * ar - m[5] * ai + m[6] * br - m[7] * bi
            st[hi + 1] = m[4] * ai + m[5] * ar + m[6] * bi + m[7] * br
        i += 2 * stride


cdef void _swap_amp(double* st, Py_ssize_t x, Py_ssize_t y) noexcept nogil:
    cdef double tr = st[2 * x], ti = st[2 * x + 1]
    st[2 * x] = st[2 * y]
    st[2 * x + 1] = st[2 * y + 1]
    st[2 * y] = tr
    st[2 * y + 1] = ti


cdef int _measure(double* st, Py_ssize_t dim, Py_ssize_t q, double u) noexcept nogil:
    # amplitudes come in blocks of 2*stride: the low half has qubit q = 0
    cdef Py_ssize_t stride = 1 << q, i, j
    cdef double p0 = 0.0, scale
    cdef double* keep
    cdef double* drop
    cdef int outcome
    i = 0
    while i < dim:
        for j in range(2 * i, 2 * (i + stride)):
            p0 += st[j] * st[j]
        i += 2 * stride
    outcome = 0 if u < p0 else 1
    scale = 1.0 / sqrt(p0 if outcome == 0 else 1.0 - p0)
    i = 0
    while i < dim:
        keep = st + 2 * (i + outcome * stride)
        drop = st + 2 * (i + (1 - outcome) * stride)
        for j in range(2 * stride):
            keep[j] *= scale
            drop[j] = 0.0
        i += 2 * stride
    return outcome


cdef void _apply(double* st, Py_ssize_t dim, int kind, Py_ssize_t a, Py_ssize_t b,
                 const double* m) noexcept nogil:
    cdef Py_ssize_t i, ba = 1 << a, bb = 1 << b
    if kind == OP_U1:
        _u1(st, dim, a, m)
    elif kind == OP_CX:
        for i in range(dim):
            if (i & ba) and not (i & bb):
                _swap_amp(st, i, i | bb)
    elif kind == OP_CZ:
        for i in range(dim):
            if (i & ba) and (i & bb):
                st[2 * i] = -st[2 * i]
                st[2 * i + 1] = -st[2 * i + 1]
    elif kind == OP_SWAP:
        for i in range(dim):
            if (i & ba) and not (i & bb):
                _swap_amp(st, i, (i ^ ba) | bb)


cdef double[8] _X = [0, 0, 1, 0, 1, 0, 0, 0]


def replay_shots(cnp.int64_t[:, ::1] ops, double complex[:, :, ::1] mats,
                 int num_qubits, int num_results, double[:, ::1] uniforms):
    cdef Py_ssize_t shots = uniforms.shape[0], nops = ops.shape[0]
    cdef Py_ssize_t dim = 1 << num_qubits
    cdef Py_ssize_t s, k, draw, prefix
    cdef int latch, kind
    out_arr = np.zeros((shots, num_results), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    m_arr = np.ascontiguousarray(np.asarray(mats, dtype=np.complex128)).view(np.float64).reshape(-1)
    if m_arr.size == 0:
        m_arr = np.zeros(8)
    cdef double[::1] mflat = m_arr
    cdef double* mp = &mflat[0]
    init_arr = np.zeros(2 * dim)
    cdef double[::1] init = init_arr
    st_arr = np.zeros(2 * dim)
    cdef double[::1] stv = st_arr
    cdef double* st = &stv[0]

    with nogil:
        # Unitaries before the first measurement, reset or fetch are the same in every shot.
        init[0] = 1.0
        prefix = 0
        while prefix < nops and ops[prefix, 0] < OP_MEASURE:
            _apply(&init[0], dim, <int>ops[prefix, 0], ops[prefix, 1], ops[prefix, 2],
                   mp + 8 * ops[prefix, 3])
            prefix += 1
        for s in range(shots):
            memcpy(st, &init[0], 2 * dim * sizeof(double))
            draw = 0
            latch = 0
            for k in range(prefix, nops):
                kind = <int>ops[k, 0]
                if kind == OP_MEASURE:
                    latch = _measure(st, dim, ops[k, 1], uniforms[s, draw])
                    draw += 1
                elif kind == OP_RESET:
                    if _measure(st, dim, ops[k, 1], uniforms[s, draw]):
                        _u1(st, dim, ops[k, 1], _X)
                    draw += 1
                elif kind == OP_FETCH:
                    out[s, ops[k, 1]] = latch
                else:
                    _apply(st, dim, kind, ops[k, 1], ops[k, 2], mp + 8 * ops[k, 3])
    return out_arr
