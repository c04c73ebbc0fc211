# cython: language_level=3
"""Compiled relaxation kernel.

Mirrors _pykernels.relax_kernel expression for expression; the two backends
must stay bitwise interchangeable. Built with -ffp-contract=off so the C
compiler cannot fuse the multiply-adds that numpy rounds separately.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

cdef Py_ssize_t _CHUNK = 4096


def relax_kernel(double[:, ::1] values, double[::1] h, signed char[::1] spins,
                 double[::1] fields, double energy0, int kind, double temperature,
                 long long max_steps, object rng, bint record):
    """See _pykernels.relax_kernel for the stepping contract."""
    cdef Py_ssize_t n = spins.shape[0]
    s_obj = np.empty(n, dtype=np.float64)
    cdef double[::1] s = s_obj
    cdef Py_ssize_t j
    for j in range(n):
        s[j] = <double> spins[j]

    cdef double energy = energy0
    cdef double d = 0.0
    cdef double u, u2, p, c, x, e, best
    cdef Py_ssize_t k = 0
    cdef long long steps_done = 0, accepted = 0
    cdef bint converged = False

    buf_obj = None
    cdef double[::1] buf = None
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t buf_len = 0

    idx_list = []
    delta_list = []
    energy_list = []

    while steps_done < max_steps:
        if kind == 0 or kind == 1:
            best = (4.0 * s[0]) * fields[0] - (2.0 * h[0]) * s[0]
            k = 0
            for j in range(1, n):
                d = (4.0 * s[j]) * fields[j] - (2.0 * h[j]) * s[j]
                if d < best:
                    best = d
                    k = j
            if kind == 0:
                d = best
                if d >= 0.0:
                    converged = True
                    break
            else:
                if best >= 0.0:
                    converged = True
                    break
                while True:
                    if pos == buf_len:
                        buf_obj = rng.random(_CHUNK)
                        buf = buf_obj
                        buf_len = buf.shape[0]
                        pos = 0
                    u = buf[pos]
                    pos += 1
                    k = <Py_ssize_t> (u * n)
                    if k == n:
                        k = n - 1
                    d = (4.0 * s[k]) * fields[k] - (2.0 * h[k]) * s[k]
                    if d < 0.0:
                        break
            steps_done += 1
        else:
            if pos == buf_len:
                buf_obj = rng.random(_CHUNK)
                buf = buf_obj
                buf_len = buf.shape[0]
                pos = 0
            u = buf[pos]
            pos += 1
            k = <Py_ssize_t> (u * n)
            if k == n:
                k = n - 1
            d = (4.0 * s[k]) * fields[k] - (2.0 * h[k]) * s[k]
            if kind == 2:
                p = 1.0 if d <= 0.0 else exp(-d / temperature)
            else:
                x = d / temperature
                if x >= 0.0:
                    e = exp(-x)
                    p = e / (1.0 + e)
                else:
                    p = 1.0 / (1.0 + exp(x))
            if pos == buf_len:
                buf_obj = rng.random(_CHUNK)
                buf = buf_obj
                buf_len = buf.shape[0]
                pos = 0
            u2 = buf[pos]
            pos += 1
            steps_done += 1
            if not (u2 < p):
                continue

        spins[k] = -spins[k]
        s[k] = -s[k]
        c = 2.0 * s[k]
        for j in range(n):
            fields[j] = fields[j] + c * values[k, j]
        fields[k] = fields[k] - c * values[k, k]
        energy = energy + d
        accepted += 1
        if record:
            idx_list.append(k)
            delta_list.append(d)
            energy_list.append(energy)

    idx = np.asarray(idx_list, dtype=np.int64)
    delta_arr = np.asarray(delta_list, dtype=np.float64)
    energy_arr = np.asarray(energy_list, dtype=np.float64)
    return idx, delta_arr, energy_arr, energy, converged, steps_done, accepted
