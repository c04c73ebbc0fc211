"""Distributional statistics of the cavity-mediated couplings.

Positions are Gaussian with standard deviation `width` in waist units, so
the coupling between two ensembles is j = cos(2 r_i . r_j) with a closed
density, distribution function, moments, sign statistics, and a known
random-matrix limit (semicircle bulk, Wigner-surmise spacings) at large
width. Everything here works in the normalized convention |j| <= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connectivity import CouplingMatrix
from .errors import DegenerateSpectrumError, ParameterError, ShapeError

__all__ = [
    "Histogram",
    "coupling_pdf",
    "coupling_cdf",
    "coupling_moments",
    "coupling_correlation",
    "negative_fraction",
    "sample_couplings",
    "McCouplingSummary",
    "coupling_mc_summary",
    "FrustrationEstimate",
    "frustration_probability",
    "semicircle_pdf",
    "semicircle_cdf",
    "wigner_surmise_pdf",
    "wigner_surmise_cdf",
    "SpectralSummary",
    "spectral_summary",
    "hellinger",
    "hellinger_to_semicircle",
    "ks_to_surmise",
    "CollapseResult",
    "hellinger_collapse",
]

DEFAULT_BINS = 101
DEFAULT_SPAN = 3.5
DEFAULT_WINDOW = 21


def _check_width(width: float) -> float:
    if not np.isfinite(width) or width <= 0:
        raise ParameterError(f"width must be finite and > 0, got {width}")
    return float(width)


# ---------------------------------------------------------------------------
# closed-form coupling law


def coupling_pdf(j, width: float):
    """Density of j = cos(2 r_i . r_j) for Gaussian positions of the given width.

    Written with negative exponents only, so it stays finite down to very
    small widths where sinh/cosh overflow. Diverges at the endpoints;
    |j| >= 1 is outside the domain.
    """
    w = _check_width(width)
    arr = np.asarray(j, dtype=np.float64)
    if (np.abs(arr) >= 1.0).any():
        raise ParameterError("coupling density is defined for |j| < 1 only")
    inv = 1.0 / (2.0 * w * w)
    a = np.pi * inv
    bma = -np.arccos(arr) * inv
    num = np.exp(bma) + np.exp(-2.0 * a - bma)
    den = (1.0 - np.exp(-2.0 * a)) * (2.0 * w * w) * np.sqrt(1.0 - arr * arr)
    out = num / den
    return out if out.ndim else float(out)


def coupling_cdf(j, width: float):
    """Distribution function of the pairwise coupling; continuous on [-1, 1]."""
    w = _check_width(width)
    arr = np.asarray(j, dtype=np.float64)
    if (np.abs(arr) > 1.0).any():
        raise ParameterError("coupling distribution is defined on [-1, 1]")
    inv = 1.0 / (2.0 * w * w)
    a = np.pi * inv
    bma = -np.arccos(arr) * inv
    out = (np.exp(bma) - np.exp(-2.0 * a - bma)) / (1.0 - np.exp(-2.0 * a))
    return out if out.ndim else float(out)


def coupling_moments(width: float) -> tuple[float, float]:
    """Exact (mean, standard deviation) of the pairwise coupling."""
    w = _check_width(width)
    w4 = w ** 4
    mean = 1.0 / (1.0 + 4.0 * w4)
    std = (4.0 * w4 / (1.0 + 4.0 * w4)) * np.sqrt(
        (5.0 + 8.0 * w4) / (1.0 + 16.0 * w4)
    )
    return float(mean), float(std)


def coupling_correlation(width: float) -> float:
    """Second moment E[J_ij J_jk] across a shared ensemble (not centered)."""
    w = _check_width(width)
    return float(1.0 / (1.0 + 8.0 * w ** 4))


def negative_fraction(width: float) -> float:
    """Probability that a pairwise coupling is antiferromagnetic."""
    w = _check_width(width)
    x = np.pi / (4.0 * w * w)
    e = np.exp(-x)
    return float(e / (1.0 + e * e))


def sample_couplings(width: float, n_pairs: int, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo draw of n_pairs couplings between fresh position pairs."""
    w = _check_width(width)
    if n_pairs < 1:
        raise ParameterError(f"n_pairs must be >= 1, got {n_pairs}")
    a = w * rng.standard_normal((n_pairs, 2))
    b = w * rng.standard_normal((n_pairs, 2))
    return np.cos(2.0 * np.einsum("ij,ij->i", a, b))


@dataclass(frozen=True)
class McCouplingSummary:
    """Sampled coupling statistics with standard errors."""

    width: float
    n_samples: int
    mean: float
    mean_se: float
    std: float
    std_se: float
    correlation: float
    correlation_se: float
    negative_fraction: float
    negative_fraction_se: float


def coupling_mc_summary(width: float, n_samples: int,
                        rng: np.random.Generator) -> McCouplingSummary:
    """One-pass Monte Carlo estimate of mean, std, shared-index correlation,
    and antiferromagnetic fraction, each with its standard error.

    Draws position triples so the correlation across a shared ensemble can
    be measured alongside the single-pair statistics.
    """
    w = _check_width(width)
    if n_samples < 2:
        raise ParameterError(f"n_samples must be >= 2, got {n_samples}")
    ri = w * rng.standard_normal((n_samples, 2))
    rj = w * rng.standard_normal((n_samples, 2))
    rk = w * rng.standard_normal((n_samples, 2))
    j1 = np.cos(2.0 * np.einsum("ij,ij->i", ri, rj))
    j2 = np.cos(2.0 * np.einsum("ij,ij->i", rj, rk))

    n = float(n_samples)
    mean = float(j1.mean())
    var = float(j1.var(ddof=1))
    std = float(np.sqrt(var))
    mean_se = std / np.sqrt(n)
    # delta-method SE for the standard deviation, no normality assumed
    m4 = float(((j1 - mean) ** 4).mean())
    var_of_var = max(m4 - var * var, 0.0) / n
    std_se = np.sqrt(var_of_var) / (2.0 * std) if std > 0 else 0.0

    prod = j1 * j2
    corr = float(prod.mean())
    corr_se = float(prod.std(ddof=1)) / np.sqrt(n)

    neg = float((j1 < 0).mean())
    neg_se = np.sqrt(max(neg * (1.0 - neg), 0.0) / n)

    return McCouplingSummary(
        width=w,
        n_samples=int(n_samples),
        mean=mean,
        mean_se=float(mean_se),
        std=std,
        std_se=float(std_se),
        correlation=corr,
        correlation_se=corr_se,
        negative_fraction=neg,
        negative_fraction_se=float(neg_se),
    )


@dataclass(frozen=True)
class FrustrationEstimate:
    probability: float
    standard_error: float
    n_triples: int


def frustration_probability(width: float, n_triples: int = 100_000,
                            rng: np.random.Generator | int = 0) -> FrustrationEstimate:
    """Monte Carlo probability that a position triple is frustrated,
    i.e. the product of its three couplings is negative."""
    w = _check_width(width)
    if n_triples < 1:
        raise ParameterError(f"n_triples must be >= 1, got {n_triples}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    ri = w * gen.standard_normal((n_triples, 2))
    rj = w * gen.standard_normal((n_triples, 2))
    rk = w * gen.standard_normal((n_triples, 2))
    prod = (
        np.cos(2.0 * np.einsum("ij,ij->i", ri, rj))
        * np.cos(2.0 * np.einsum("ij,ij->i", rj, rk))
        * np.cos(2.0 * np.einsum("ij,ij->i", rk, ri))
    )
    p = float((prod < 0).mean())
    se = float(np.sqrt(max(p * (1.0 - p), 0.0) / n_triples))
    return FrustrationEstimate(p, se, int(n_triples))


# ---------------------------------------------------------------------------
# histograms and divergences


@dataclass(frozen=True)
class Histogram:
    """Piecewise-constant density on increasing bin edges.

    densities integrate to one over the covered range (enforced to 1e-9);
    count is the number of samples that landed inside the edges.
    """

    edges: np.ndarray
    densities: np.ndarray
    count: int

    def __post_init__(self):
        edges = np.ascontiguousarray(self.edges, dtype=np.float64)
        dens = np.ascontiguousarray(self.densities, dtype=np.float64)
        if edges.ndim != 1 or edges.size < 2:
            raise ShapeError("edges must be a 1-D array with at least 2 entries")
        if dens.shape != (edges.size - 1,):
            raise ShapeError(
                f"densities must have shape ({edges.size - 1},), got {dens.shape}"
            )
        if (np.diff(edges) <= 0).any():
            raise ParameterError("edges must be strictly increasing")
        if (dens < 0).any():
            raise ParameterError("densities must be nonnegative")
        total = float(np.sum(dens * np.diff(edges)))
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(
                f"densities must integrate to 1 within 1e-9, got {total!r}"
            )
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "densities", dens)

    @classmethod
    def from_samples(cls, samples, edges) -> "Histogram":
        samples = np.asarray(samples, dtype=np.float64)
        edges = np.ascontiguousarray(edges, dtype=np.float64)
        counts, _ = np.histogram(samples, bins=edges)
        inside = int(counts.sum())
        if inside == 0:
            raise ParameterError("no samples fall inside the requested edges")
        dens = counts / (inside * np.diff(edges))
        return cls(edges, dens, inside)

    @property
    def masses(self) -> np.ndarray:
        return self.densities * np.diff(self.edges)


def hellinger(p: Histogram, q: Histogram) -> float:
    """Hellinger distance between two piecewise-constant densities.

    The bin grids need not match; both are rebinned onto the union of edges
    (density zero outside a histogram's own range) before the affinity
    integral.
    """
    if not isinstance(p, Histogram) or not isinstance(q, Histogram):
        raise ParameterError("hellinger expects two Histogram instances")
    grid = np.union1d(p.edges, q.edges)
    mids = 0.5 * (grid[:-1] + grid[1:])
    widths = np.diff(grid)

    def dens_at(hist: Histogram) -> np.ndarray:
        idx = np.searchsorted(hist.edges, mids, side="right") - 1
        ok = (idx >= 0) & (idx < hist.densities.size)
        out = np.zeros_like(mids)
        out[ok] = hist.densities[idx[ok]]
        return out

    affinity = float(np.sum(np.sqrt(dens_at(p) * dens_at(q)) * widths))
    return float(np.sqrt(max(1.0 - min(affinity, 1.0), 0.0)))


# ---------------------------------------------------------------------------
# random-matrix references


def semicircle_pdf(x):
    """Bulk eigenvalue density sqrt(4 - x^2) / (2 pi) on [-2, 2]."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(arr)
    ok = np.abs(arr) < 2.0
    out[ok] = np.sqrt(4.0 - arr[ok] ** 2) / (2.0 * np.pi)
    return out if out.ndim else float(out)


def semicircle_cdf(x):
    """Antiderivative of the semicircle density, clamped outside [-2, 2]."""
    arr = np.clip(np.asarray(x, dtype=np.float64), -2.0, 2.0)
    out = 0.5 + (arr * np.sqrt(4.0 - arr ** 2) + 4.0 * np.arcsin(arr / 2.0)) / (
        4.0 * np.pi
    )
    return out if out.ndim else float(out)


def wigner_surmise_pdf(s):
    """Spacing density (pi s / 2) exp(-pi s^2 / 4) for unit-mean spacings."""
    arr = np.asarray(s, dtype=np.float64)
    out = np.where(arr >= 0, (np.pi * arr / 2.0) * np.exp(-np.pi * arr * arr / 4.0), 0.0)
    return out if out.ndim else float(out)


def wigner_surmise_cdf(s):
    arr = np.asarray(s, dtype=np.float64)
    out = np.where(arr >= 0, 1.0 - np.exp(-np.pi * arr * arr / 4.0), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SpectralSummary:
    """Normalized spectrum of a zero-diagonal coupling matrix.

    eigenvalues are centered and scaled to unit variance, ascending.
    spacings are consecutive gaps divided by a sliding local mean and then
    rescaled to mean one, the usual unfolding for spacing statistics.
    """

    eigenvalues: np.ndarray
    spacings: np.ndarray

    def __post_init__(self):
        eigs = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        sp = np.ascontiguousarray(self.spacings, dtype=np.float64)
        if eigs.ndim != 1 or eigs.size < 2:
            raise ShapeError("eigenvalues must be 1-D with at least 2 entries")
        if (np.diff(eigs) < 0).any():
            raise ParameterError("eigenvalues must be sorted ascending")
        if abs(float(eigs.std()) - 1.0) > 1e-9:
            raise ParameterError("eigenvalues must be scaled to unit variance")
        if sp.size and abs(float(sp.mean()) - 1.0) > 1e-9:
            raise ParameterError("spacings must have mean 1 within 1e-9")
        if (sp < 0).any():
            raise ParameterError("spacings must be nonnegative")
        object.__setattr__(self, "eigenvalues", eigs)
        object.__setattr__(self, "spacings", sp)


def _sliding_mean(values: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    m = values.size
    idx = np.arange(m)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, m)
    return (csum[hi] - csum[lo]) / (hi - lo)


def spectral_summary(coupling: CouplingMatrix,
                     window: int = DEFAULT_WINDOW) -> SpectralSummary:
    """Eigenvalues (centered, unit variance) and unfolded spacings.

    The diagonal is zeroed before diagonalization so the self-interaction
    offset never shifts the bulk. A spectrum with no spacing structure
    (all eigenvalues equal, or a window of identical eigenvalues) raises
    DegenerateSpectrumError.
    """
    if window < 3 or window % 2 == 0:
        raise ParameterError(f"window must be an odd integer >= 3, got {window}")
    eigs = np.linalg.eigvalsh(coupling.off_diagonal())
    eigs.sort()
    centered = eigs - eigs.mean()
    scale = float(centered.std())
    if scale == 0.0 or not np.isfinite(scale):
        raise DegenerateSpectrumError("spectrum has zero variance")
    norm = centered / scale
    gaps = np.diff(norm)
    local = _sliding_mean(gaps, window)
    if (local <= 0.0).any():
        raise DegenerateSpectrumError(
            "a local spacing window has zero mean; spacings are degenerate"
        )
    s = gaps / local
    s = s / s.mean()
    return SpectralSummary(norm, s)


def hellinger_to_semicircle(eigenvalues, n_bins: int = DEFAULT_BINS,
                            span: float = DEFAULT_SPAN) -> float:
    """Hellinger distance between binned eigenvalues and the semicircle.

    Bin masses for the reference come from the exact antiderivative, not
    midpoint sampling. Empirical mass outside [-span, span] counts as pure
    affinity loss, so detached outliers increase the distance.
    """
    eigs = np.asarray(eigenvalues, dtype=np.float64)
    if eigs.size == 0:
        raise ParameterError("no eigenvalues supplied")
    edges = np.linspace(-span, span, n_bins + 1)
    counts, _ = np.histogram(eigs, bins=edges)
    emp = counts / eigs.size
    ref = np.diff(semicircle_cdf(edges))
    affinity = float(np.sum(np.sqrt(emp * ref)))
    return float(np.sqrt(max(1.0 - min(affinity, 1.0), 0.0)))


def ks_to_surmise(spacings) -> float:
    """Kolmogorov-Smirnov distance of unfolded spacings to the Wigner surmise."""
    s = np.sort(np.asarray(spacings, dtype=np.float64))
    if s.size == 0:
        raise ParameterError("no spacings supplied")
    cdf = wigner_surmise_cdf(s)
    n = s.size
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(upper - cdf), np.max(cdf - lower)))


# ---------------------------------------------------------------------------
# width-scaling collapse


@dataclass(frozen=True)
class CollapseResult:
    """Semicircle-distance curves per size and their collapse quality.

    curves maps size -> (widths, hellinger distances). scores maps the
    scaling exponent nu to the mean pairwise RMS difference between curves
    interpolated on a common grid of x = n^(1/nu) * w; lower is better.
    """

    curves: dict[int, tuple[np.ndarray, np.ndarray]]
    scores: dict[float, float]

    @property
    def best_nu(self) -> float:
        return min(self.scores, key=lambda k: self.scores[k])


def hellinger_collapse(sizes, widths, trials: int = 4, rng=0,
                       nus=(-3.0, -4.0, -5.0), n_bins: int = DEFAULT_BINS,
                       span: float = DEFAULT_SPAN) -> CollapseResult:
    """Measure semicircle convergence curves and score their collapse.

    For each (size, width), eigenvalues from `trials` independent layouts
    are pooled after per-realization normalization and compared with the
    semicircle. For each candidate exponent the curves are interpolated in
    x = n^(1/nu) * w on the overlap of their x-ranges and scored by mean
    pairwise RMS difference; a single size scores zero by convention.
    """
    from .connectivity import confocal_matrix, sample_layout

    sizes = [int(n) for n in np.atleast_1d(sizes)]
    widths = np.sort(np.asarray(widths, dtype=np.float64))
    if len(sizes) == 0 or widths.size == 0:
        raise ParameterError("sizes and widths must be nonempty")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    ss = (
        rng
        if isinstance(rng, np.random.SeedSequence)
        else np.random.SeedSequence(int(rng))
    )
    curves: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for n in sizes:
        hs = np.empty(widths.size)
        for wi, w in enumerate(widths):
            pooled = []
            for child in ss.spawn(trials):
                seed = int(child.generate_state(1, np.uint64)[0])
                layout = sample_layout(n, float(w), seed)
                summary = spectral_summary(confocal_matrix(layout))
                pooled.append(summary.eigenvalues)
            hs[wi] = hellinger_to_semicircle(
                np.concatenate(pooled), n_bins=n_bins, span=span
            )
        curves[n] = (widths.copy(), hs)

    scores: dict[float, float] = {}
    for nu in nus:
        nu = float(nu)
        if len(sizes) < 2:
            scores[nu] = 0.0
            continue
        xcurves = {
            n: (widths * float(n) ** (1.0 / nu), curves[n][1]) for n in sizes
        }
        lo = max(x.min() for x, _ in xcurves.values())
        hi = min(x.max() for x, _ in xcurves.values())
        if hi <= lo:
            scores[nu] = float("inf")
            continue
        grid = np.linspace(lo, hi, 50)
        interped = [np.interp(grid, x, y) for x, y in xcurves.values()]
        diffs = []
        for i in range(len(interped)):
            for k in range(i + 1, len(interped)):
                diffs.append(
                    float(np.sqrt(np.mean((interped[i] - interped[k]) ** 2)))
                )
        scores[nu] = float(np.mean(diffs))
    return CollapseResult(curves, scores)
