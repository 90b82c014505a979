# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exact-attribution kernel: the O(m * 2^m) accumulation loop."""

import numpy as np

cimport numpy as cnp

from ccshap._shapley_py import coalition_weights

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def exact_phi_from_table(values, int num_players):
    """Exact attribution for every player from the full 2^m coalition value table.

    Matches ccshap._shapley_py.exact_phi_from_table up to floating-point
    summation order.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] table = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t size = (<Py_ssize_t> 1) << num_players
    if table.shape[0] != size:
        raise ValueError(
            f"value table must have length 2^{num_players}, got ({table.shape[0]},)"
        )
    weights_np = coalition_weights(num_players)
    phi_np = np.zeros(num_players, dtype=np.float64)

    cdef double[::1] w = weights_np
    cdef double[::1] v = table
    cdef double[::1] phi = phi_np
    cdef Py_ssize_t i, mask, bit
    cdef double acc

    with nogil:
        for i in range(num_players):
            bit = (<Py_ssize_t> 1) << i
            acc = 0.0
            for mask in range(size):
                if mask & bit:
                    continue
                acc += w[__builtin_popcountll(<unsigned long long> mask)] * (v[mask | bit] - v[mask])
            phi[i] = acc
    return phi_np
