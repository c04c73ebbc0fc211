"""Coupling-matrix construction.

Positions are measured in units of the cavity waist, so the pairwise law for
photon-mediated couplings is cos(2 r_i . r_j) with no free length scale.
Matrices carry their construction kind so downstream code and the binary
container can distinguish cavity-derived couplings from the Hopfield-style
and random-bond references.
"""

from __future__ import annotations

import csv
import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericError, ParameterError, RankError, ShapeError

__all__ = [
    "CouplingKind",
    "EnsembleLayout",
    "ConfocalParams",
    "CouplingMatrix",
    "PatternSet",
    "sample_layout",
    "confocal_matrix",
    "confocal_matrix_convolved",
    "hebbian_matrix",
    "pseudoinverse_matrix",
    "sk_matrix",
    "random_patterns",
    "save_coupling",
    "load_coupling",
    "coupling_to_csv",
    "coupling_from_csv",
]

_MAGIC = b"GMJ1"

# Overlap matrices with condition numbers past this are treated as singular.
_RANK_LIMIT = 1e10

# Pattern eigenvector residual allowed for the projection construction.
_EIGEN_RTOL = 1e-8


class CouplingKind(enum.IntEnum):
    """Construction recipe recorded with each matrix (and in the container)."""

    CONFOCAL = 0
    CONFOCAL_CONVOLVED = 1
    HEBBIAN = 2
    PSEUDOINVERSE = 3
    SK = 4


def _as_float_matrix(values) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ShapeError("empty coupling matrix")
    return arr


def _mirror_upper(values: np.ndarray) -> np.ndarray:
    """Exact symmetrization: copy the upper triangle over the lower."""
    upper = np.triu(values)
    return upper + np.triu(values, 1).T


@dataclass(frozen=True)
class EnsembleLayout:
    """Transverse ensemble positions, in waist units, restricted to x >= 0.

    The pairwise coupling is even in each position vector, so mirrored
    layouts generate identical matrices; keeping one half-plane makes the
    stored layout canonical.
    """

    positions: np.ndarray
    width: float
    seed: int

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ShapeError(f"positions must be (n, 2), got {pos.shape}")
        if pos.shape[0] == 0:
            raise ShapeError("layout needs at least one ensemble")
        if not np.isfinite(pos).all():
            raise ParameterError("positions must be finite")
        if not np.isfinite(self.width) or self.width < 0:
            raise ParameterError(f"width must be finite and >= 0, got {self.width}")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class ConfocalParams:
    """Scalar knobs of the cavity-mediated coupling.

    beta scales the self-interaction added on the diagonal. prefactor is the
    single positive number multiplying the whole matrix when physical units
    are requested. sigma_a is the ensemble radius (waist units) used by the
    finite-size construction.
    """

    beta: float = 10.0
    prefactor: float = 1.0
    sigma_a: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ParameterError(f"beta must be finite and >= 0, got {self.beta}")
        if not np.isfinite(self.prefactor) or self.prefactor <= 0:
            raise ParameterError(
                f"prefactor must be finite and > 0, got {self.prefactor}"
            )
        if not np.isfinite(self.sigma_a) or self.sigma_a < 0:
            raise ParameterError(
                f"sigma_a must be finite and >= 0, got {self.sigma_a}"
            )


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric coupling matrix plus construction metadata.

    normalized means the off-diagonal entries are the bare cos values in
    [-1, 1]; diag_beta records the beta used for cavity-derived diagonals
    (0.0 for the reference constructions).
    """

    values: np.ndarray
    kind: CouplingKind
    normalized: bool
    diag_beta: float = 0.0

    def __post_init__(self):
        vals = _as_float_matrix(self.values)
        if not np.isfinite(vals).all():
            raise ParameterError("coupling entries must be finite")
        if not np.array_equal(vals, vals.T):
            scale = np.abs(vals).max()
            if scale == 0.0 or np.abs(vals - vals.T).max() > 1e-12 * scale:
                raise ShapeError("coupling matrix must be symmetric")
            vals = _mirror_upper(vals)
        if self.normalized:
            off = vals - np.diag(np.diagonal(vals))
            if np.abs(off).max() > 1.0 + 1e-12:
                raise ParameterError(
                    "normalized couplings must have off-diagonal entries in [-1, 1]"
                )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "kind", CouplingKind(self.kind))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def off_diagonal(self) -> np.ndarray:
        """Copy of the matrix with the diagonal zeroed."""
        out = self.values.copy()
        np.fill_diagonal(out, 0.0)
        return out

    def with_zero_diagonal(self) -> "CouplingMatrix":
        return CouplingMatrix(self.off_diagonal(), self.kind, self.normalized, 0.0)


@dataclass(frozen=True)
class PatternSet:
    """P binary patterns of length n, entries +-1, stored as int8 rows."""

    patterns: np.ndarray

    def __post_init__(self):
        pats = np.ascontiguousarray(self.patterns, dtype=np.int8)
        if pats.ndim != 2:
            raise ShapeError(f"patterns must be (p, n), got {pats.shape}")
        if pats.shape[0] == 0 or pats.shape[1] == 0:
            raise ShapeError("pattern set must be nonempty")
        if not np.isin(pats, (-1, 1)).all():
            raise ShapeError("pattern entries must be +-1")
        object.__setattr__(self, "patterns", pats)

    @property
    def p(self) -> int:
        return self.patterns.shape[0]

    @property
    def n(self) -> int:
        return self.patterns.shape[1]


def sample_layout(n: int, width: float, seed: int) -> EnsembleLayout:
    """Draw n positions from an isotropic Gaussian of the given width.

    Rows are reflected into the x >= 0 half-plane; the coupling law is even
    in each position, so this changes nothing downstream. width = 0 puts
    every ensemble at the origin.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not np.isfinite(width) or width < 0:
        raise ParameterError(f"width must be finite and >= 0, got {width}")
    rng = np.random.default_rng(seed)
    pos = width * rng.standard_normal((n, 2))
    flip = pos[:, 0] < 0
    pos[flip] *= -1.0
    return EnsembleLayout(pos, float(width), int(seed))


def confocal_matrix(
    layout: EnsembleLayout,
    params: ConfocalParams | None = None,
    normalized: bool = True,
) -> CouplingMatrix:
    """Cavity-mediated couplings J_ij = cos(2 r_i . r_j) + beta on the diagonal.

    normalized=True returns the bare values; otherwise every entry (diagonal
    included) is multiplied by params.prefactor.
    """
    if params is None:
        params = ConfocalParams()
    gram = layout.positions @ layout.positions.T
    vals = np.cos(2.0 * gram)
    idx = np.arange(layout.n)
    vals[idx, idx] += params.beta
    if not normalized:
        vals *= params.prefactor
    vals = _mirror_upper(vals)
    return CouplingMatrix(vals, CouplingKind.CONFOCAL, normalized, params.beta)


def confocal_matrix_convolved(
    layout: EnsembleLayout, params: ConfocalParams | None = None
) -> CouplingMatrix:
    """Couplings for Gaussian ensembles of radius sigma_a instead of points.

    Finite ensemble size compresses the cos argument, damps the whole matrix
    by 1/(1 + 4 sigma_a^4), and suppresses pairs far from the axis through a
    Gaussian envelope. sigma_a = 0 reproduces confocal_matrix with
    normalized=False exactly. Always returned in physical units.
    """
    if params is None:
        params = ConfocalParams()
    sig2 = params.sigma_a * params.sigma_a
    denom = 1.0 + 4.0 * sig2 * sig2
    gram = layout.positions @ layout.positions.T
    sq = np.diagonal(gram).copy()
    envelope = np.exp((-2.0 * sig2 / denom) * (sq[:, None] + sq[None, :]))
    vals = np.cos(2.0 * gram / denom) * (envelope / denom)
    idx = np.arange(layout.n)
    vals[idx, idx] += params.beta
    vals *= params.prefactor
    vals = _mirror_upper(vals)
    return CouplingMatrix(
        vals, CouplingKind.CONFOCAL_CONVOLVED, False, params.beta
    )


def hebbian_matrix(patterns: PatternSet) -> CouplingMatrix:
    """Outer-product storage J = (1/n) sum_mu xi^mu (xi^mu)^T, zero diagonal."""
    x = patterns.patterns.astype(np.float64)
    vals = (x.T @ x) / patterns.n
    np.fill_diagonal(vals, 0.0)
    vals = _mirror_upper(vals)
    return CouplingMatrix(vals, CouplingKind.HEBBIAN, False, 0.0)


def pseudoinverse_matrix(patterns: PatternSet) -> CouplingMatrix:
    """Projection storage that makes each pattern an exact linear fixed point.

    J = (1/n) sum_{mu,nu} xi^mu (C^-1)_{mu nu} (xi^nu)^T with the overlap
    matrix C_{mu nu} = (1/n) xi^mu . xi^nu. Requires linearly independent
    patterns; the diagonal is zeroed after the eigenvector check.
    """
    x = patterns.patterns.astype(np.float64)
    overlap = (x @ x.T) / patterns.n
    cond = float(np.linalg.cond(overlap))
    if not np.isfinite(cond) or cond > _RANK_LIMIT:
        raise RankError(
            f"pattern overlap matrix condition number {cond:.3e} exceeds "
            f"{_RANK_LIMIT:.0e}; patterns are not linearly independent enough"
        )
    coeff = np.linalg.solve(overlap, x)
    vals = (x.T @ coeff) / patterns.n
    residual = float(np.abs(vals @ x.T - x.T).max())
    if residual > _EIGEN_RTOL:
        raise NumericError(
            f"pattern eigenvector residual {residual:.3e} exceeds {_EIGEN_RTOL:.0e}"
        )
    np.fill_diagonal(vals, 0.0)
    vals = _mirror_upper(vals)
    return CouplingMatrix(vals, CouplingKind.PSEUDOINVERSE, False, 0.0)


def sk_matrix(n: int, variance: float = 1.0, seed: int = 0) -> CouplingMatrix:
    """Random symmetric Gaussian bonds with zero diagonal."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not np.isfinite(variance) or variance <= 0:
        raise ParameterError(f"variance must be finite and > 0, got {variance}")
    rng = np.random.default_rng(seed)
    vals = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    vals[iu] = np.sqrt(variance) * rng.standard_normal(iu[0].size)
    vals = vals + vals.T
    return CouplingMatrix(vals, CouplingKind.SK, False, 0.0)


def random_patterns(p: int, n: int, rng: np.random.Generator) -> PatternSet:
    """p independent uniform +-1 patterns of length n."""
    if p < 1 or n < 1:
        raise ParameterError(f"p and n must be >= 1, got p={p}, n={n}")
    pats = (2 * rng.integers(0, 2, size=(p, n)) - 1).astype(np.int8)
    return PatternSet(pats)


def save_coupling(matrix: CouplingMatrix, path) -> None:
    """Write the binary container: magic, u64 size, row-major float64, kind byte."""
    payload = matrix.values.astype(np.float64).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", matrix.n))
        fh.write(payload)
        fh.write(bytes([int(matrix.kind)]))


def load_coupling(path) -> CouplingMatrix:
    """Read the binary container written by save_coupling.

    The container stores values and kind only; normalized is re-derived from
    the off-diagonal bounds and diag_beta is not recoverable (left at 0.0).
    """
    raw = Path(path).read_bytes()
    if len(raw) < 13 or raw[:4] != _MAGIC:
        raise ParameterError(f"{path}: not a coupling container")
    (n,) = struct.unpack_from("<Q", raw, 4)
    expected = 4 + 8 + 8 * n * n + 1
    if len(raw) != expected:
        raise ParameterError(
            f"{path}: container holds {len(raw)} bytes, expected {expected} for n={n}"
        )
    vals = np.frombuffer(raw, dtype="<f8", count=n * n, offset=12).reshape(n, n)
    kind = CouplingKind(raw[-1])
    off = vals - np.diag(np.diagonal(vals))
    normalized = bool(
        kind == CouplingKind.CONFOCAL and np.abs(off).max() <= 1.0 + 1e-12
    )
    return CouplingMatrix(vals.copy(), kind, normalized, 0.0)


def coupling_to_csv(matrix: CouplingMatrix, path) -> None:
    """Write one header row holding n, then the n matrix rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([matrix.n])
        for row in matrix.values:
            writer.writerow([repr(float(v)) for v in row])


def coupling_from_csv(path, kind: CouplingKind = CouplingKind.CONFOCAL) -> CouplingMatrix:
    """Read a matrix written by coupling_to_csv."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ParameterError(f"{path}: empty coupling CSV")
        n = int(header[0])
        rows = [[float(v) for v in row] for row in reader if row]
    vals = np.asarray(rows, dtype=np.float64)
    if vals.shape != (n, n):
        raise ShapeError(f"{path}: expected {n} rows of {n} values, got {vals.shape}")
    off = vals - np.diag(np.diagonal(vals))
    normalized = bool(
        kind == CouplingKind.CONFOCAL and np.abs(off).max() <= 1.0 + 1e-12
    )
    return CouplingMatrix(vals, kind, normalized, 0.0)
