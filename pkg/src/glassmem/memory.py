"""Associative-memory layer built on the landscape dynamics.

Provides Hamming-perturbation recall curves and basin sizes, the
regularized linear encoder/decoder that stores arbitrary patterns in
native metastable states, capacity sweeps, and robustness of stored
states against placement and atom-number noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import landscape
from .connectivity import (
    ConfocalParams,
    CouplingKind,
    CouplingMatrix,
    EnsembleLayout,
    PatternSet,
    confocal_matrix,
    sample_layout,
)
from .errors import (
    CapacityError,
    CodecError,
    DivergenceError,
    NotFixedPointError,
    ParameterError,
    ShapeError,
)

__all__ = [
    "NoiseModel",
    "RecallReport",
    "Codec",
    "CapacityTable",
    "ChaosReport",
    "hamming",
    "is_fixed_point",
    "recall_curve",
    "basin_size",
    "build_codec",
    "store_recall",
    "capacity_sweep",
    "hebbian_attractor_overlap",
    "weight_chaos",
]

# success threshold for basin membership: p >= 0.95, compared in integers
_BASIN_NUM = 19
_BASIN_DEN = 20


def _as_pattern(state) -> np.ndarray:
    arr = np.ascontiguousarray(state, dtype=np.int8)
    if arr.ndim != 1:
        raise ShapeError(f"state must be 1-d, got shape {arr.shape}")
    if not np.isin(arr, (-1, 1)).all():
        raise ShapeError("state entries must be +-1")
    return arr


def hamming(a, b) -> int:
    """Number of positions where the two +-1 states differ."""
    av = _as_pattern(a)
    bv = _as_pattern(b)
    if av.shape != bv.shape:
        raise ShapeError(f"length mismatch: {av.shape[0]} vs {bv.shape[0]}")
    return int(np.count_nonzero(av != bv))


def is_fixed_point(state, coupling: CouplingMatrix, field=None) -> bool:
    """True when no single flip strictly lowers the energy."""
    costs = landscape.flip_costs(state, coupling, field)
    return bool((costs >= 0.0).all())


@dataclass(frozen=True)
class NoiseModel:
    """Placement and atom-number noise levels for stored-state robustness.

    position_sigma is the per-coordinate placement jitter in micrometers;
    atom_relative is the relative per-ensemble atom-number fluctuation.
    """

    position_sigma: float = 0.0
    atom_relative: float = 0.0

    def __post_init__(self):
        if self.position_sigma < 0.0:
            raise ParameterError(
                f"position_sigma must be >= 0, got {self.position_sigma}")
        if self.atom_relative < 0.0:
            raise ParameterError(
                f"atom_relative must be >= 0, got {self.atom_relative}")


@dataclass(frozen=True)
class RecallReport:
    """Recall probability as a function of Hamming corruption depth.

    probabilities are reported raw, not forced monotone; basin_size is
    the last depth before the first crossing below 0.95.
    """

    distances: np.ndarray
    trials: np.ndarray
    successes: np.ndarray
    probabilities: np.ndarray
    basin_size: int

    def __post_init__(self):
        for name in ("distances", "trials", "successes", "probabilities"):
            arr = getattr(self, name)
            if arr.shape != self.distances.shape:
                raise ShapeError(f"{name} must match distances shape")
        if ((self.probabilities < 0.0) | (self.probabilities > 1.0)).any():
            raise ParameterError("probabilities must lie in [0, 1]")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["d", "trials", "successes", "probability"])
            for d, t, s, p in zip(self.distances, self.trials,
                                  self.successes, self.probabilities):
                w.writerow([int(d), int(t), int(s), repr(float(p))])


def _corrupt(attractor: np.ndarray, d: int, rng: np.random.Generator):
    flipped = attractor.copy()
    where = rng.choice(attractor.shape[0], size=d, replace=False)
    flipped[where] = -flipped[where]
    return flipped


def recall_curve(attractor, coupling: CouplingMatrix, field=None,
                 kind: landscape.Dynamics | None = None,
                 max_d: int | None = None, trials: int = 100,
                 rng: np.random.Generator | None = None,
                 stop_at_crossing: bool = False) -> RecallReport:
    """Measure exact-recovery probability after d random spin flips.

    For each depth d the attractor is corrupted at d uniformly chosen
    distinct positions and relaxed under the given dynamics; success is
    exact recovery of the attractor (no global-flip identification).
    The attractor must be a fixed point, else NotFixedPointError.
    """
    target = _as_pattern(attractor)
    n = coupling.n
    if target.shape[0] != n:
        raise ShapeError(f"attractor length {target.shape[0]} != n {n}")
    if not is_fixed_point(target, coupling, field):
        raise NotFixedPointError("attractor is not a fixed point")
    if kind is None:
        kind = landscape.sd()
    if max_d is None:
        max_d = n
    if not 0 <= max_d <= n:
        raise ParameterError(f"max_d must be in [0, {n}], got {max_d}")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if rng is None:
        rng = np.random.default_rng(0)

    ds = [0]
    tr = [trials]
    sc = [trials]  # a fixed point recalls itself exactly
    crossed = False
    for d in range(1, max_d + 1):
        hits = 0
        for _ in range(trials):
            probe = _corrupt(target, d, rng)
            out = landscape.relax(probe, coupling, field, kind, rng=rng,
                                  record_trace=False)
            hits += np.array_equal(out.final_state, target)
        ds.append(d)
        tr.append(trials)
        sc.append(hits)
        if hits * _BASIN_DEN < trials * _BASIN_NUM:
            crossed = True
            if stop_at_crossing:
                break
    distances = np.asarray(ds, dtype=np.int64)
    successes = np.asarray(sc, dtype=np.int64)
    trials_arr = np.asarray(tr, dtype=np.int64)
    ok = successes * _BASIN_DEN >= trials_arr * _BASIN_NUM
    basin = int(distances[-1]) if not crossed else int(
        distances[np.argmin(ok)] - 1)
    return RecallReport(
        distances=distances,
        trials=trials_arr,
        successes=successes,
        probabilities=successes / trials_arr,
        basin_size=basin,
    )


def basin_size(attractor, coupling: CouplingMatrix, field=None,
               kind: landscape.Dynamics | None = None, trials: int = 20,
               rng: np.random.Generator | None = None,
               max_d: int | None = None) -> int:
    """Largest corruption depth recalled with probability >= 0.95."""
    report = recall_curve(attractor, coupling, field, kind, max_d=max_d,
                          trials=trials, rng=rng, stop_at_crossing=True)
    return report.basin_size


def _sign_pattern(values: np.ndarray) -> np.ndarray:
    # zero maps to +1 so outputs are always valid patterns
    return np.where(values >= 0.0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class Codec:
    """Regularized linear pattern store.

    encoder maps external patterns into catalog states and decoder maps
    catalog states back; both are applied with a sign threshold.  margin
    is the smallest pre-threshold magnitude over all stored mappings.
    """

    encoder: np.ndarray
    decoder: np.ndarray
    regularization: float
    catalog: np.ndarray
    patterns: np.ndarray
    margin: float

    @property
    def n(self) -> int:
        return self.encoder.shape[0]

    @property
    def p(self) -> int:
        return self.catalog.shape[0]

    def encode(self, state) -> np.ndarray:
        x = _as_pattern(state)
        if x.shape[0] != self.n:
            raise ShapeError(f"state length {x.shape[0]} != n {self.n}")
        return _sign_pattern(self.encoder @ x.astype(np.float64))

    def decode(self, state) -> np.ndarray:
        y = _as_pattern(state)
        if y.shape[0] != self.n:
            raise ShapeError(f"state length {y.shape[0]} != n {self.n}")
        return _sign_pattern(self.decoder @ y.astype(np.float64))

    def decode_linear(self, state) -> np.ndarray:
        """Raw decoder output before the sign threshold."""
        y = _as_pattern(state)
        if y.shape[0] != self.n:
            raise ShapeError(f"state length {y.shape[0]} != n {self.n}")
        return self.decoder @ y.astype(np.float64)


def _ridge_map(targets: np.ndarray, sources: np.ndarray,
               lam: float) -> np.ndarray:
    # M = (sum_p t_p s_p^T)(lam 1 + sum_p s_p s_p^T)^{-1}, rows stacked
    n = sources.shape[1]
    gram = lam * np.eye(n) + sources.T @ sources
    cross = targets.T @ sources
    return np.linalg.solve(gram, cross.T).T


def build_codec(patterns: PatternSet, catalog, lam: float | None = None) -> Codec:
    """Fit the encoder/decoder pair and verify every stored mapping.

    catalog supplies at least P distinct states; the first P are paired
    with the patterns in order.  Raises CodecError when any sign mapping
    fails at the given regularization.
    """
    xi = patterns.patterns.astype(np.float64)
    p, n = xi.shape
    cat = np.ascontiguousarray(catalog, dtype=np.int8)
    if cat.ndim != 2 or cat.shape[1] != n:
        raise ShapeError(f"catalog must have shape (*, {n}), got {cat.shape}")
    if cat.shape[0] < p:
        raise CapacityError(
            f"catalog holds {cat.shape[0]} states, need {p}",
            found=cat.shape[0])
    if not np.isin(cat, (-1, 1)).all():
        raise ShapeError("catalog entries must be +-1")
    cat = cat[:p]
    if len({tuple(row.tolist()) for row in cat}) != p:
        raise ParameterError("assigned catalog states must be distinct")
    if lam is None:
        lam = 1e-3 * n
    if lam <= 0.0:
        raise ParameterError(f"regularization must be > 0, got {lam}")

    phi = cat.astype(np.float64)
    enc = _ridge_map(phi, xi, lam)
    dec = _ridge_map(xi, phi, lam)

    enc_raw = xi @ enc.T
    dec_raw = phi @ dec.T
    margin = float(min(np.abs(enc_raw).min(), np.abs(dec_raw).min()))
    enc_ok = (_sign_pattern(enc_raw) == cat).all(axis=1)
    dec_ok = (_sign_pattern(dec_raw) == patterns.patterns).all(axis=1)
    bad = np.flatnonzero(~(enc_ok & dec_ok))
    if bad.size:
        worst = int(bad[0])
        raise CodecError(
            f"sign mapping failed for pattern {worst} "
            f"(margin {margin:.3e}, regularization {lam:.3e})")
    return Codec(encoder=enc, decoder=dec, regularization=float(lam),
                 catalog=cat.copy(), patterns=patterns.patterns.copy(),
                 margin=margin)


def store_recall(state, codec: Codec, coupling: CouplingMatrix, field=None,
                 kind: landscape.Dynamics | None = None,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Encode, relax to a metastable state, decode.

    The returned pattern is the decoded fixed point reached from the
    encoded input under the chosen dynamics (steepest descent default).
    """
    if codec.n != coupling.n:
        raise ShapeError(f"codec n {codec.n} != coupling n {coupling.n}")
    if kind is None:
        kind = landscape.sd()
    encoded = codec.encode(state)
    out = landscape.relax(encoded, coupling, field, kind, rng=rng,
                          record_trace=False)
    if not out.converged:
        raise DivergenceError("relaxation did not reach a fixed point")
    return codec.decode(out.final_state)


def _encoded_basin(pattern: np.ndarray, codec: Codec,
                   coupling: CouplingMatrix, trials: int,
                   rng: np.random.Generator, max_d: int) -> int:
    # basin of the full store/recall round trip under input corruption
    n = pattern.shape[0]
    for d in range(1, max_d + 1):
        hits = 0
        for _ in range(trials):
            probe = _corrupt(pattern, d, rng)
            got = store_recall(probe, codec, coupling)
            hits += np.array_equal(got, pattern)
        if hits * _BASIN_DEN < trials * _BASIN_NUM:
            return d - 1
    return max_d


def distinct_metastable_catalog(coupling: CouplingMatrix, count: int,
                                rng: np.random.Generator, field=None,
                                budget: int | None = None,
                                independent: bool = False,
                                stall_limit: int | None = None) -> np.ndarray:
    """Collect distinct fixed points by steepest descent from random states.

    Sampling this way favors large-basin states. At zero field a state and
    its global flip are one energy minimum and linearly dependent, which
    would break the linear decoder, so only the canonical representative
    is kept. With ``independent`` each kept state must also grow the span
    of the catalog, so the result is full rank by construction; discovery
    order, and with it the large-basin bias, is unchanged. When the span
    stalls for half of ``stall_limit`` the discovery dynamics switches
    from steepest descent to zero-temperature Metropolis, which visits
    small-basin minima far more often; the kept states are exact local
    minima under either rule. Raises CapacityError when the attempt
    budget runs out short of the requested count, or when ``stall_limit``
    consecutive attempts add nothing.
    """
    n = coupling.n
    if budget is None:
        budget = 200 * count + 4000 if independent else 4 * count + 16
    if stall_limit is None and independent:
        stall_limit = max(12000, 20 * count)
    seen: set[tuple] = set()
    kept: list[np.ndarray] = []
    basis = np.zeros((n, 0))
    rule = landscape.sd()
    switched = not independent
    stale = 0
    for _ in range(budget):
        if stall_limit is not None and not switched and stale >= stall_limit // 2:
            rule = landscape.zero_t_mh()
            switched = True
            stale = 0
        start = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        st = landscape.relax(start, coupling, field, rule, rng=rng,
                             record_trace=False).final_state
        if field is None:
            st = landscape.canonical_form(st)
        key = tuple(st.tolist())
        stale += 1
        if key not in seen:
            seen.add(key)
            if independent:
                v = st.astype(np.float64)
                r = v - basis @ (basis.T @ v)
                norm = float(np.linalg.norm(r))
                if norm > 1e-8 * math.sqrt(n):
                    basis = np.hstack([basis, (r / norm)[:, None]])
                    kept.append(st)
                    stale = 0
            else:
                kept.append(st)
                stale = 0
        if len(kept) >= count:
            return np.stack(kept[:count])
        if stall_limit is not None and stale >= stall_limit:
            break
    raise CapacityError(
        f"found {len(kept)} usable metastable states, need {count}",
        found=len(kept))


@dataclass(frozen=True)
class CapacityTable:
    """Mean stored-pattern basin size per loading ratio."""

    ratios: np.ndarray
    mean_basin: np.ndarray
    std_basin: np.ndarray
    n_patterns: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["ratio", "mean_basin", "std_basin", "n_patterns"])
            for r, m, s, k in zip(self.ratios, self.mean_basin,
                                  self.std_basin, self.n_patterns):
                w.writerow([repr(float(r)), repr(float(m)), repr(float(s)),
                            int(k)])


def capacity_sweep(n: int, ratios, width: float = 1.5, trials: int = 20,
                   rng: np.random.Generator | None = None,
                   lam: float | None = None,
                   max_d: int | None = None,
                   confocal: ConfocalParams | None = None,
                   layout_retries: int = 40) -> CapacityTable:
    """Mean encoded-pattern basin size as a function of loading P/N.

    For each ratio: sample a fresh layout, collect P span-independent
    metastable states, fit the codec, and measure each stored pattern's
    basin under input corruption with the full encode/relax/decode round
    trip. An exact linear codec needs P independent states, and near full
    loading not every disorder realization reaches N independent fixed
    points, so realizations whose catalog stalls short or whose codec
    cannot map exactly are discarded and a fresh layout is drawn, up to
    ``layout_retries`` attempts per ratio.

    lam defaults to a vanishing ridge here, unlike build_codec: this is
    an exactness benchmark, and a heavy ridge suppresses the catalog's
    weakest span directions, which breaks sign decoding near P = N even
    though the states are independent.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.size == 0:
        raise ParameterError("ratios must be nonempty")
    if ((ratios <= 0.0) | (ratios > 1.0)).any():
        raise ParameterError("ratios must lie in (0, 1]")
    if rng is None:
        rng = np.random.default_rng(0)
    if confocal is None:
        confocal = ConfocalParams()
    if max_d is None:
        max_d = n
    if lam is None:
        lam = 1e-9
    means, stds, counts = [], [], []
    for ratio in ratios:
        p = max(1, int(round(ratio * n)))
        coupling = codec = xi = None
        last_err: Exception | None = None
        for _ in range(max(1, layout_retries)):
            layout = sample_layout(n, width,
                                   int(rng.integers(0, np.iinfo(np.int64).max)))
            cand = confocal_matrix(layout, confocal).with_zero_diagonal()
            try:
                catalog = distinct_metastable_catalog(cand, p, rng,
                                                      independent=True)
                xi = np.where(rng.random((p, n)) < 0.5, 1, -1).astype(np.int8)
                codec = build_codec(PatternSet(xi), catalog, lam)
            except (CapacityError, CodecError) as err:
                last_err = err
                continue
            coupling = cand
            break
        if coupling is None:
            raise CapacityError(
                f"no usable realization for ratio {ratio} in "
                f"{layout_retries} attempts: {last_err}",
                found=0)
        basins = [
            _encoded_basin(xi[q], codec, coupling, trials, rng, max_d)
            for q in range(p)
        ]
        means.append(float(np.mean(basins)))
        stds.append(float(np.std(basins)))
        counts.append(p)
    return CapacityTable(
        ratios=ratios.copy(),
        mean_basin=np.asarray(means),
        std_basin=np.asarray(stds),
        n_patterns=np.asarray(counts, dtype=np.int64),
    )


def hebbian_attractor_overlap(patterns: PatternSet,
                              coupling: CouplingMatrix,
                              rng: np.random.Generator | None = None) -> np.ndarray:
    """Overlap of each stored pattern with its relaxed attractor.

    Each pattern is relaxed under zero-temperature Metropolis on the
    given Hebbian coupling; the overlap is the normalized dot product
    with the original pattern.
    """
    if coupling.kind != CouplingKind.HEBBIAN:
        raise ParameterError("coupling must be Hebbian for this comparison")
    if coupling.n != patterns.n:
        raise ShapeError(f"coupling n {coupling.n} != pattern n {patterns.n}")
    if rng is None:
        rng = np.random.default_rng(0)
    out = np.empty(patterns.p)
    for q in range(patterns.p):
        xi = patterns.patterns[q]
        st = landscape.relax(xi, coupling, None, landscape.zero_t_mh(),
                             rng=rng, record_trace=False).final_state
        out[q] = float(xi.astype(np.float64) @ st.astype(np.float64)) / patterns.n
    return out


@dataclass(frozen=True)
class ChaosReport:
    """Stored-state and coupling-matrix drift under physical noise."""

    overlaps: np.ndarray
    weight_changes: np.ndarray

    @property
    def mean_overlap(self) -> float:
        return float(self.overlaps.mean())

    @property
    def mean_weight_change(self) -> float:
        return float(self.weight_changes.mean())


def weight_chaos(layout: EnsembleLayout, params: ConfocalParams,
                 noise: NoiseModel, trials: int = 20,
                 rng: np.random.Generator | None = None,
                 waist_um: float = 35.0) -> ChaosReport:
    """Measure how placement and atom-number noise move a stored state.

    A reference state is found by steepest descent on the clean matrix.
    Each trial jitters every position by a Gaussian of width
    position_sigma (micrometers, converted via waist_um) and scales
    J_ij by (1+eps_i)(1+eps_j) with zero-sum eps of scale atom_relative,
    then relaxes the reference state on the perturbed matrix.  Reports
    the state overlap and the relative off-diagonal matrix change.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if waist_um <= 0.0:
        raise ParameterError(f"waist_um must be > 0, got {waist_um}")
    if rng is None:
        rng = np.random.default_rng(0)
    n = layout.n
    clean = confocal_matrix(layout, params).with_zero_diagonal()
    clean_norm = float(np.linalg.norm(clean.values))
    start = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    ref = landscape.relax(start, clean, None, landscape.sd(),
                          record_trace=False).final_state

    sigma_w0 = noise.position_sigma / waist_um
    overlaps = np.empty(trials)
    changes = np.empty(trials)
    for t in range(trials):
        jitter = rng.normal(0.0, sigma_w0, size=layout.positions.shape)
        moved = EnsembleLayout(layout.positions + jitter, layout.width,
                               layout.seed)
        perturbed = confocal_matrix(moved, params).with_zero_diagonal().values
        if noise.atom_relative > 0.0:
            eps = rng.normal(0.0, noise.atom_relative, size=n)
            eps -= eps.mean()  # total atom number conserved
            perturbed = perturbed * np.outer(1.0 + eps, 1.0 + eps)
            np.fill_diagonal(perturbed, 0.0)
        # atom-number factors can push entries past 1, so not "normalized"
        noisy = CouplingMatrix(perturbed, CouplingKind.CONFOCAL,
                               normalized=False)
        settled = landscape.relax(ref, noisy, None, landscape.sd(),
                                  record_trace=False).final_state
        overlaps[t] = float(
            ref.astype(np.float64) @ settled.astype(np.float64)) / n
        changes[t] = float(
            np.linalg.norm(clean.values - perturbed)) / clean_norm
    return ChaosReport(overlaps=overlaps, weight_changes=changes)
