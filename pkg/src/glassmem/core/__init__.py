"""Single-flip relaxation kernels.

Two interchangeable backends implement the same stepping contract: a Cython
extension (built at install time) and a numpy fallback. The fallback is
selected automatically when the extension is missing, or forced by setting
the environment variable GLASSMEM_PURE=1 before import. Both backends
consume uniforms from the supplied numpy Generator in chunks of CHUNK and
evaluate flip costs with identical floating-point expressions, so results
agree bitwise.
"""

from __future__ import annotations

import os

import numpy as np

SD = 0
ZERO_T_MH = 1
METROPOLIS = 2
GLAUBER = 3

CHUNK = 4096


def _load_impl():
    if os.environ.get("GLASSMEM_PURE", "") == "1":
        from . import _pykernels

        return _pykernels, "pure"
    try:
        from . import _ckernels

        return _ckernels, "compiled"
    except ImportError:
        from . import _pykernels

        return _pykernels, "pure"


_impl, _backend_name = _load_impl()

relax_kernel = _impl.relax_kernel


def backend() -> str:
    """Name of the active backend: "compiled" or "pure"."""
    return _backend_name


def fields_and_energy(values, h, spins):
    """Local fields l_i = sum_{j != i} J_ij s_j and energy H = -s.l + h.s.

    Evaluated with dense numpy operations in the driver, never inside a
    backend, so both backends start a relaxation from identical floats.
    """
    s = spins.astype(np.float64)
    fields = values @ s - np.diagonal(values) * s
    energy = float(np.dot(h, s) - np.dot(s, fields))
    return fields, energy


class UniformStream:
    """Chunked [0, 1) doubles with the same refill pattern as the kernels.

    A Python-level stepper that uses this stream replays the exact uniform
    sequence a kernel-driven relaxation would consume from the same
    Generator state.
    """

    __slots__ = ("_rng", "_buf", "_pos")

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._buf = np.empty(0)
        self._pos = 0

    def take(self) -> float:
        if self._pos == self._buf.shape[0]:
            self._buf = self._rng.random(CHUNK)
            self._pos = 0
        u = float(self._buf[self._pos])
        self._pos += 1
        return u
