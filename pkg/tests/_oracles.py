"""Independent reference implementations used to cross-check the package.

Everything here is written from first principles with plain loops or a
different linear-algebra route than the library uses, so a shared bug
cannot hide on both sides of a comparison.
"""

from __future__ import annotations

import itertools

import numpy as np


def energy_reference(values: np.ndarray, h: np.ndarray, spins: np.ndarray) -> float:
    """H = -sum_{i != j} J_ij s_i s_j + sum_i h_i s_i, by explicit loops."""
    n = len(spins)
    e = 0.0
    for i in range(n):
        e += h[i] * spins[i]
        for j in range(n):
            if i != j:
                e -= values[i, j] * spins[i] * spins[j]
    return e


def flip_cost_reference(values: np.ndarray, h: np.ndarray, spins: np.ndarray, i: int) -> float:
    """Energy difference of flipping spin i, via two full energy evaluations."""
    flipped = spins.copy()
    flipped[i] = -flipped[i]
    return energy_reference(values, h, flipped) - energy_reference(values, h, spins)


def brute_force_minima(values: np.ndarray, h: np.ndarray) -> set[tuple[int, ...]]:
    """All states whose single-flip costs are every one >= 0, by enumeration.

    Exponential in n; callers keep n <= 12.
    """
    n = values.shape[0]
    minima: set[tuple[int, ...]] = set()
    for bits in itertools.product((-1, 1), repeat=n):
        s = np.array(bits, dtype=np.int8)
        if all(flip_cost_reference(values, h, s, i) >= 0.0 for i in range(n)):
            minima.add(bits)
    return minima


def brute_force_minima_canonical(values: np.ndarray, h: np.ndarray) -> set[tuple[int, ...]]:
    """Zero-field minima identified up to the global spin flip."""
    out: set[tuple[int, ...]] = set()
    for bits in brute_force_minima(values, h):
        neg = tuple(-b for b in bits)
        out.add(bits if bits >= neg else neg)
    return out


def ridge_map_reference(targets: np.ndarray, sources: np.ndarray, lam: float) -> np.ndarray:
    """M = T S^T (lam I + S S^T)^{-1} via an SVD of S, not a linear solve.

    targets: (p, n) rows t_p; sources: (p, n) rows s_p. Returns (n, n) M
    minimizing sum_p ||M s_p - t_p||^2 + lam ||M||_F^2.
    """
    s = sources.T.astype(np.float64)  # (n, p)
    t = targets.T.astype(np.float64)
    u, sig, vt = np.linalg.svd(s, full_matrices=False)
    # M = t vt^T diag(sig/(sig^2+lam)) u^T
    scale = sig / (sig * sig + lam)
    return (t @ vt.T) * scale @ u.T


def rank_one_codec_reference(xi: np.ndarray, phi: np.ndarray, lam: float) -> np.ndarray:
    """Closed-form single-pattern encoder: M = phi xi^T / (lam + n)."""
    n = len(xi)
    return np.outer(phi.astype(np.float64), xi.astype(np.float64)) / (lam + n)
