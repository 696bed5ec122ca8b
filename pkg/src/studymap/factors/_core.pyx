# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled factor kernels: pointwise product and binary marginalization.

Same contract and bit-identical results as studymap.factors.core_py; see
the package docstring for the table layout.
"""

import numpy as np


def product(vars_a, table_a, vars_b, table_b, vars_out):
    """Pointwise product of two factors over the union scope *vars_out*.

    Walks the output table once, keeping both input indices current with an
    odometer over the output bits; each step is O(1) amortized.
    """
    cdef Py_ssize_t k = len(vars_out)
    cdef Py_ssize_t n = 1 << k

    # Per output axis: the index stride it contributes inside each input
    # (0 when the input does not carry that variable).
    stride_a_arr = np.zeros(k, dtype=np.int64)
    stride_b_arr = np.zeros(k, dtype=np.int64)
    pos_a = {v: i for i, v in enumerate(vars_a)}
    pos_b = {v: i for i, v in enumerate(vars_b)}
    cdef Py_ssize_t ka = len(vars_a)
    cdef Py_ssize_t kb = len(vars_b)
    cdef Py_ssize_t j
    for j in range(k):
        v = vars_out[j]
        if v in pos_a:
            stride_a_arr[j] = 1 << (ka - 1 - pos_a[v])
        if v in pos_b:
            stride_b_arr[j] = 1 << (kb - 1 - pos_b[v])

    cdef long long[::1] sa = stride_a_arr
    cdef long long[::1] sb = stride_b_arr
    counters_arr = np.zeros(k, dtype=np.int64)
    cdef long long[::1] counters = counters_arr
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef const double[::1] ta = np.ascontiguousarray(table_a, dtype=np.float64)
    cdef const double[::1] tb = np.ascontiguousarray(table_b, dtype=np.float64)

    cdef Py_ssize_t i, axis
    cdef Py_ssize_t ia = 0, ib = 0
    for i in range(n):
        out[i] = ta[ia] * tb[ib]
        axis = k - 1
        while axis >= 0:
            if counters[axis] == 0:
                counters[axis] = 1
                ia += sa[axis]
                ib += sb[axis]
                break
            counters[axis] = 0
            ia -= sa[axis]
            ib -= sb[axis]
            axis -= 1
    return out_arr


def marginalize(vars_in, table, position):
    """Sum out the variable at *position* (index into vars_in)."""
    cdef Py_ssize_t k = len(vars_in)
    cdef Py_ssize_t pos = position
    cdef Py_ssize_t shift = k - 1 - pos  # LSB bit position of the eliminated var
    cdef Py_ssize_t n_out = 1 << (k - 1)
    cdef Py_ssize_t low_mask = (1 << shift) - 1

    out_arr = np.empty(n_out, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef const double[::1] t = np.ascontiguousarray(table, dtype=np.float64)

    cdef Py_ssize_t i, base
    for i in range(n_out):
        base = ((i >> shift) << (shift + 1)) | (i & low_mask)
        out[i] = t[base] + t[base | (1 << shift)]
    return out_arr
