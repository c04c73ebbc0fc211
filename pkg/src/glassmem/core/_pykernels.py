"""Pure-numpy relaxation kernel.

Reference implementation of the stepping contract shared with the compiled
extension. Every floating-point expression here is mirrored verbatim in
_ckernels.pyx; changing one side without the other breaks the bitwise
equivalence the test suite enforces.
"""

from __future__ import annotations

import math

import numpy as np

_CHUNK = 4096
_EMPTY = np.empty(0)

_SD = 0
_ZTMH = 1
_MH = 2
_GLAUBER = 3


def relax_kernel(values, h, spins, fields, energy0, kind, temperature,
                 max_steps, rng, record):
    """Iterate single-flip dynamics in place.

    Parameters
    ----------
    values : (n, n) float64, C-contiguous coupling matrix.
    h : (n,) float64 external field.
    spins : (n,) int8, entries +-1. Mutated in place.
    fields : (n,) float64 cached local fields for `spins`. Mutated in place.
    energy0 : energy of the initial state.
    kind : 0 steepest descent, 1 zero-temperature Metropolis-Hastings,
        2 finite-temperature Metropolis, 3 Glauber.
    temperature : bath temperature for kinds 2 and 3 (ignored otherwise).
    max_steps : flip budget (kinds 0, 1) or proposal budget (kinds 2, 3).
    rng : numpy Generator, consumed for kinds 1-3; may be None for kind 0.
    record : when true, per-flip arrays are returned.

    Returns
    -------
    (idx, delta, energy, energy_final, converged, steps_done, accepted)
    where the first three arrays cover accepted flips in order and
    `energy` holds the energy after each flip.
    """
    n = spins.shape[0]
    s = spins.astype(np.float64)
    energy = float(energy0)

    buf = _EMPTY
    pos = 0

    idx_list: list[int] = []
    delta_list: list[float] = []
    energy_list: list[float] = []

    converged = False
    steps_done = 0
    accepted = 0

    while steps_done < max_steps:
        if kind == _SD or kind == _ZTMH:
            delta = (4.0 * s) * fields - (2.0 * h) * s
            if kind == _SD:
                k = int(np.argmin(delta))
                d = float(delta[k])
                if d >= 0.0:
                    converged = True
                    break
            else:
                if float(delta.min()) >= 0.0:
                    converged = True
                    break
                while True:
                    if pos == buf.shape[0]:
                        buf = rng.random(_CHUNK)
                        pos = 0
                    u = float(buf[pos])
                    pos += 1
                    k = int(u * n)
                    if k == n:
                        k = n - 1
                    d = float(delta[k])
                    if d < 0.0:
                        break
            steps_done += 1
        else:
            if pos == buf.shape[0]:
                buf = rng.random(_CHUNK)
                pos = 0
            u = float(buf[pos])
            pos += 1
            k = int(u * n)
            if k == n:
                k = n - 1
            d = (4.0 * s[k]) * fields[k] - (2.0 * h[k]) * s[k]
            if kind == _MH:
                p = 1.0 if d <= 0.0 else math.exp(-d / temperature)
            else:
                x = d / temperature
                if x >= 0.0:
                    e = math.exp(-x)
                    p = e / (1.0 + e)
                else:
                    p = 1.0 / (1.0 + math.exp(x))
            if pos == buf.shape[0]:
                buf = rng.random(_CHUNK)
                pos = 0
            u2 = float(buf[pos])
            pos += 1
            steps_done += 1
            if not (u2 < p):
                continue

        spins[k] = -spins[k]
        s[k] = -s[k]
        c = 2.0 * s[k]
        fields += c * values[k]
        fields[k] -= c * values[k, k]
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
