"""Energy landscape and single-flip dynamics over binary spin states.

The energy convention counts ordered pairs, H = -sum_{i != j} J_ij s_i s_j
+ sum_i h_i s_i, so the cost of flipping spin i is
4 s_i l_i - 2 h_i s_i with the local field l_i = sum_{j != i} J_ij s_j.
Couplings on the diagonal never enter binary dynamics.

Zero-cost flips are rejected everywhere at zero temperature: a state with
no strictly negative flip cost is stable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from . import core
from .connectivity import CouplingMatrix
from .errors import (
    DegenerateFitError,
    FitError,
    ParameterError,
    ShapeError,
)

__all__ = [
    "Dynamics",
    "sd",
    "zero_t_mh",
    "metropolis",
    "glauber",
    "RelaxationTrace",
    "Relaxer",
    "energy",
    "flip_cost",
    "flip_costs",
    "step_sd",
    "step_0tmh",
    "step_finite_t",
    "relax",
    "canonical_form",
    "MetastableCensus",
    "count_metastable",
    "ScalingFit",
    "fit_metastable_scaling",
    "trace_to_csv",
]

_KIND_CODES = {
    "sd": core.SD,
    "0tmh": core.ZERO_T_MH,
    "metropolis": core.METROPOLIS,
    "glauber": core.GLAUBER,
}


@dataclass(frozen=True)
class Dynamics:
    """Which single-flip rule to iterate, plus its temperature and seed.

    kind is one of "sd" (steepest descent), "0tmh" (zero-temperature
    Metropolis-Hastings), "metropolis", or "glauber". The seed is used only
    when no Generator is passed to relax().
    """

    kind: str
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ParameterError(
                f"unknown dynamics kind {self.kind!r}; "
                f"expected one of {sorted(_KIND_CODES)}"
            )
        if self.kind in ("metropolis", "glauber"):
            if not np.isfinite(self.temperature) or self.temperature <= 0:
                raise ParameterError(
                    f"{self.kind} dynamics needs temperature > 0, "
                    f"got {self.temperature}"
                )

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def stochastic(self) -> bool:
        return self.kind != "sd"


def sd() -> Dynamics:
    return Dynamics("sd")


def zero_t_mh(seed: int = 0) -> Dynamics:
    return Dynamics("0tmh", seed=seed)


def metropolis(temperature: float, seed: int = 0) -> Dynamics:
    return Dynamics("metropolis", temperature=temperature, seed=seed)


def glauber(temperature: float, seed: int = 0) -> Dynamics:
    return Dynamics("glauber", temperature=temperature, seed=seed)


def _validate_state(state, n: int) -> np.ndarray:
    arr = np.ascontiguousarray(state, dtype=np.int8)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ShapeError(f"state must have shape ({n},), got {arr.shape}")
    if not np.isin(arr, (-1, 1)).all():
        raise ShapeError("state entries must be +-1")
    if arr is state:
        arr = arr.copy()
    return arr


def _validate_field(field, n: int) -> np.ndarray:
    if field is None:
        return np.zeros(n)
    arr = np.ascontiguousarray(field, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ShapeError(f"field must have shape ({n},), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ParameterError("field entries must be finite")
    return arr


def energy(state, coupling: CouplingMatrix, field=None) -> float:
    """H = -sum_{i != j} J_ij s_i s_j + h . s (ordered pairs, diagonal excluded)."""
    s = _validate_state(state, coupling.n)
    h = _validate_field(field, coupling.n)
    _, e = core.fields_and_energy(coupling.values, h, s)
    return e


def flip_costs(state, coupling: CouplingMatrix, field=None) -> np.ndarray:
    """Energy change of every single-spin flip from the given state."""
    spins = _validate_state(state, coupling.n)
    h = _validate_field(field, coupling.n)
    s = spins.astype(np.float64)
    fields, _ = core.fields_and_energy(coupling.values, h, spins)
    return (4.0 * s) * fields - (2.0 * h) * s


def flip_cost(state, coupling: CouplingMatrix, i: int, field=None) -> float:
    """Energy change of flipping spin i."""
    spins = _validate_state(state, coupling.n)
    h = _validate_field(field, coupling.n)
    if not 0 <= i < coupling.n:
        raise ParameterError(f"spin index {i} out of range for n={coupling.n}")
    s = spins.astype(np.float64)
    row = coupling.values[i]
    li = float(row @ s - row[i] * s[i])
    return float((4.0 * s[i]) * li - (2.0 * h[i]) * s[i])


class Relaxer:
    """Stepwise dynamics with cached local fields.

    Construction costs O(n^2); each step costs O(n). Uniform draws go
    through the same chunked stream as the batch kernels, so stepping with
    a Generator in a given state reproduces relax() bitwise.
    """

    def __init__(self, state, coupling: CouplingMatrix, field=None,
                 rng: np.random.Generator | None = None):
        self._values = coupling.values
        self._n = coupling.n
        self._h = _validate_field(field, self._n)
        self.spins = _validate_state(state, self._n)
        self._s = self.spins.astype(np.float64)
        self.fields, self.energy = core.fields_and_energy(
            self._values, self._h, self.spins
        )
        self._stream = core.UniformStream(rng) if rng is not None else None

    def _take(self) -> float:
        if self._stream is None:
            raise ParameterError("this step kind needs a Generator; pass rng=")
        return self._stream.take()

    def flip_costs(self) -> np.ndarray:
        return (4.0 * self._s) * self.fields - (2.0 * self._h) * self._s

    def _flip(self, k: int, d: float) -> tuple[int, float]:
        self.spins[k] = -self.spins[k]
        self._s[k] = -self._s[k]
        c = 2.0 * self._s[k]
        self.fields += c * self._values[k]
        self.fields[k] -= c * self._values[k, k]
        self.energy = self.energy + d
        return k, d

    def step_sd(self):
        """Flip the most negative-cost spin; None at a fixed point."""
        delta = self.flip_costs()
        k = int(np.argmin(delta))
        d = float(delta[k])
        if d >= 0.0:
            return None
        return self._flip(k, d)

    def step_0tmh(self):
        """Flip the first uniformly drawn spin with negative cost.

        Returns None only after verifying no spin has negative cost.
        """
        delta = self.flip_costs()
        if float(delta.min()) >= 0.0:
            return None
        n = self._n
        while True:
            u = self._take()
            k = int(u * n)
            if k == n:
                k = n - 1
            d = float(delta[k])
            if d < 0.0:
                return self._flip(k, d)

    def step_finite_t(self, dynamics: Dynamics):
        """One finite-temperature proposal; None when rejected."""
        if dynamics.kind not in ("metropolis", "glauber"):
            raise ParameterError(f"not a finite-T dynamics: {dynamics.kind!r}")
        n = self._n
        u = self._take()
        k = int(u * n)
        if k == n:
            k = n - 1
        d = (4.0 * self._s[k]) * self.fields[k] - (2.0 * self._h[k]) * self._s[k]
        t = dynamics.temperature
        if dynamics.kind == "metropolis":
            p = 1.0 if d <= 0.0 else float(np.exp(-d / t))
        else:
            x = d / t
            if x >= 0.0:
                e = float(np.exp(-x))
                p = e / (1.0 + e)
            else:
                p = 1.0 / (1.0 + float(np.exp(x)))
        u2 = self._take()
        if not (u2 < p):
            return None
        return self._flip(k, float(d))


def step_sd(state, coupling: CouplingMatrix, field=None):
    """One steepest-descent step, mutating state in place.

    Convenience wrapper that rebuilds the fields each call (O(n^2)); use
    Relaxer when stepping repeatedly.
    """
    r = Relaxer(state, coupling, field)
    out = r.step_sd()
    if out is not None:
        state[out[0]] = -state[out[0]]
    return out


def step_0tmh(state, coupling: CouplingMatrix, field=None,
              rng: np.random.Generator | None = None):
    """One zero-temperature Metropolis step, mutating state in place."""
    r = Relaxer(state, coupling, field, rng=rng)
    out = r.step_0tmh()
    if out is not None:
        state[out[0]] = -state[out[0]]
    return out


def step_finite_t(state, coupling: CouplingMatrix, dynamics: Dynamics,
                  field=None, rng: np.random.Generator | None = None):
    """One finite-temperature proposal, mutating state on acceptance."""
    if rng is None:
        rng = np.random.default_rng(dynamics.seed)
    r = Relaxer(state, coupling, field, rng=rng)
    out = r.step_finite_t(dynamics)
    if out is not None:
        state[out[0]] = -state[out[0]]
    return out


@dataclass(frozen=True)
class RelaxationTrace:
    """Accepted flips plus the final state of one relaxation.

    step_energy[k] is the energy after the k-th accepted flip; for the
    zero-temperature kinds the sequence is strictly decreasing. converged
    is True only when the dynamics verified that no flip cost is negative
    (finite-temperature runs never converge in this sense).
    """

    step_index: np.ndarray
    step_delta: np.ndarray
    step_energy: np.ndarray
    energy_initial: float
    energy_final: float
    final_state: np.ndarray
    final_fields: np.ndarray
    converged: bool
    steps_done: int
    accepted: int

    @property
    def steps(self) -> list[tuple[int, float, float]]:
        return list(
            zip(
                self.step_index.tolist(),
                self.step_delta.tolist(),
                self.step_energy.tolist(),
            )
        )


def relax(state, coupling: CouplingMatrix, field=None,
          dynamics: Dynamics | None = None, max_steps: int | None = None,
          rng: np.random.Generator | None = None,
          record_trace: bool = True) -> RelaxationTrace:
    """Iterate the chosen dynamics until a fixed point or the step budget.

    max_steps defaults to 100 n^2 and bounds accepted flips for the
    zero-temperature kinds and proposals for the finite-temperature ones.
    The input state is not modified.
    """
    if dynamics is None:
        dynamics = Dynamics("sd")
    n = coupling.n
    spins = _validate_state(state, n)
    h = _validate_field(field, n)
    if max_steps is None:
        max_steps = 100 * n * n
    if max_steps < 0:
        raise ParameterError(f"max_steps must be >= 0, got {max_steps}")
    if rng is None and dynamics.stochastic:
        rng = np.random.default_rng(dynamics.seed)
    fields, e0 = core.fields_and_energy(coupling.values, h, spins)
    idx, delta, evals, e_final, converged, steps_done, accepted = core.relax_kernel(
        coupling.values, h, spins, fields, e0, dynamics.code,
        float(dynamics.temperature), int(max_steps), rng, bool(record_trace),
    )
    return RelaxationTrace(
        step_index=idx,
        step_delta=delta,
        step_energy=evals,
        energy_initial=e0,
        energy_final=e_final,
        final_state=spins,
        final_fields=fields,
        converged=bool(converged),
        steps_done=int(steps_done),
        accepted=int(accepted),
    )


def trace_to_csv(trace: RelaxationTrace, path) -> None:
    """Write accepted flips as (step, index, delta_energy, energy) rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "index", "delta_energy", "energy"])
        for step, (k, d, e) in enumerate(trace.steps, start=1):
            writer.writerow([step, k, repr(float(d)), repr(float(e))])


def canonical_form(state) -> np.ndarray:
    """Representative of {s, -s}: the copy whose first spin is +1."""
    arr = np.asarray(state, dtype=np.int8)
    if arr[0] == 1:
        return arr.copy()
    return (-arr).astype(np.int8)


@dataclass(frozen=True)
class MetastableCensus:
    """Distinct stable states found by repeated stochastic relaxation."""

    count: int
    states: np.ndarray
    hits: np.ndarray

    @property
    def n_seeds(self) -> int:
        return int(self.hits.sum())


def _entropy_seed_sequence(rng_like) -> np.random.SeedSequence:
    if isinstance(rng_like, np.random.SeedSequence):
        return rng_like
    if isinstance(rng_like, np.random.Generator):
        words = rng_like.integers(0, 2 ** 64, size=2, dtype=np.uint64)
        return np.random.SeedSequence([int(w) for w in words])
    return np.random.SeedSequence(int(rng_like))


def count_metastable(coupling: CouplingMatrix, field=None, n_seeds: int = 100,
                     rng=0, max_steps: int | None = None) -> MetastableCensus:
    """Count distinct stable states reached by 0TMH from random starts.

    States are deduplicated up to a global spin flip (at zero external
    field the landscape is exactly symmetric under it). The census is a
    lower bound that saturates as n_seeds grows.
    """
    if n_seeds < 1:
        raise ParameterError(f"n_seeds must be >= 1, got {n_seeds}")
    n = coupling.n
    children = _entropy_seed_sequence(rng).spawn(n_seeds)
    dynamics = Dynamics("0tmh")
    seen: dict[bytes, int] = {}
    states: list[np.ndarray] = []
    hits: list[int] = []
    for child in children:
        gen = np.random.default_rng(child)
        start = (2 * gen.integers(0, 2, size=n) - 1).astype(np.int8)
        trace = relax(start, coupling, field, dynamics, max_steps=max_steps,
                      rng=gen, record_trace=False)
        canon = canonical_form(trace.final_state)
        key = canon.tobytes()
        slot = seen.get(key)
        if slot is None:
            seen[key] = len(states)
            states.append(canon)
            hits.append(1)
        else:
            hits[slot] += 1
    return MetastableCensus(
        count=len(states),
        states=np.asarray(states, dtype=np.int8),
        hits=np.asarray(hits, dtype=np.int64),
    )


@dataclass(frozen=True)
class ScalingFit:
    """Parameters of count = sqrt(1 + a * exp(b * x)), x = n^(1/nu) (w - w_am)."""

    a: float
    b: float
    nu: float
    w_am: float
    residual_rms: float
    n_points: int

    def evaluate(self, sizes, widths) -> np.ndarray:
        sizes = np.asarray(sizes, dtype=np.float64)
        widths = np.asarray(widths, dtype=np.float64)
        x = sizes ** (1.0 / self.nu) * (widths - self.w_am)
        return np.sqrt(1.0 + self.a * np.exp(self.b * x))


_FIT_X0 = (0.33, 3.4, 2.4, 0.67)
_FIT_LO = (1e-12, 1e-3, 0.2, -5.0)
_FIT_HI = (1e6, 1e3, 20.0, 5.0)
_FIT_MAX_EVALS = 10_000
_FIT_NU_GRID = np.geomspace(1.0, 8.0, 29)
_FIT_WAM_POINTS = 61


def _line_collapse(sizes, widths, z, weights):
    """Best (nu, w_am, b, ln a) putting z on one line of the rescaled axis.

    The model makes log(count^2 - 1) exactly linear in x, so a good
    rescaling collapses every size onto a single line. Scanning (nu, w_am)
    and solving the line by weighted least squares emphasizes the
    near-onset points, where the crossing actually shows, instead of the
    deep-glass tail where a finite-seed census undercounts. Cells whose
    points do not mix at least two sizes on both sides of the median x are
    rejected: those are the degenerate almost-unrescaled alignments.
    """
    best = None
    for nu in _FIT_NU_GRID:
        for w_am in np.linspace(widths.min(), widths.max(), _FIT_WAM_POINTS):
            x = sizes ** (1.0 / nu) * (widths - w_am)
            design = np.vstack([x * weights, weights]).T
            coef, res, *_ = np.linalg.lstsq(design, z * weights, rcond=None)
            if coef[0] <= 0:
                continue
            med = np.median(x)
            if (np.unique(sizes[x <= med]).size < 2
                    or np.unique(sizes[x > med]).size < 2):
                continue
            rms = float(np.sqrt(res[0] / z.size)) if res.size else 0.0
            if best is None or rms < best[0]:
                best = (rms, float(nu), float(w_am), float(coef[0]),
                        float(coef[1]))
    return best


def _bounded_lsq(residuals, x0, lo, hi):
    res = least_squares(residuals, x0=x0, bounds=(lo, hi), method="trf",
                        max_nfev=_FIT_MAX_EVALS, xtol=1e-14, ftol=1e-14,
                        gtol=1e-14)
    rms = float(np.sqrt(np.mean(res.fun ** 2)))
    if res.status <= 0:
        raise FitError(
            f"scaling fit did not converge within {_FIT_MAX_EVALS} "
            f"evaluations; residual rms {rms:.6e}"
        )
    return res.x, rms


def fit_metastable_scaling(sizes, widths, counts,
                           count_errors=None) -> ScalingFit:
    """Fit the metastable-count crossing to the stretched-exponential form.

    Needs at least four (size, width, count) samples and at least one count
    above one; otherwise the four parameters are unconstrained. With two or
    more system sizes the rescaling exponent and crossing point are located
    first by a collapse scan in log(count^2 - 1), where the model is a
    single straight line; this is robust to the census undercounting deep
    in the glass phase. Passing count_errors (standard errors of the mean
    counts) weights that scan so near-onset points whose excess over one is
    pure noise cannot drag the crossing. A direct four-parameter fit
    carries the single-size case, where no collapse information exists.
    """
    sizes = np.atleast_1d(np.asarray(sizes, dtype=np.float64))
    widths = np.atleast_1d(np.asarray(widths, dtype=np.float64))
    counts = np.atleast_1d(np.asarray(counts, dtype=np.float64))
    if not (sizes.shape == widths.shape == counts.shape) or sizes.ndim != 1:
        raise ShapeError("sizes, widths, counts must be equal-length 1-D arrays")
    if sizes.size < 4:
        raise ParameterError(f"need at least 4 samples, got {sizes.size}")
    if (counts < 1).any():
        raise ParameterError("counts must be >= 1")
    if counts.max() <= 1.0:
        raise DegenerateFitError(
            "every count equals one; the crossing location is unconstrained"
        )
    if count_errors is not None:
        count_errors = np.atleast_1d(np.asarray(count_errors, dtype=np.float64))
        if count_errors.shape != counts.shape:
            raise ShapeError("count_errors must match counts")
        if (count_errors < 0).any() or not np.isfinite(count_errors).all():
            raise ParameterError("count_errors must be finite and >= 0")

    def model(theta):
        a, b, nu, w_am = theta
        x = sizes ** (1.0 / nu) * (widths - w_am)
        return np.sqrt(1.0 + a * np.exp(np.clip(b * x, -700.0, 700.0)))

    keep = counts > 1.0
    grid_best = None
    weights = None
    if np.unique(sizes).size >= 2 and keep.sum() >= 6:
        ck = counts[keep]
        z = np.log(ck ** 2 - 1.0)
        if count_errors is None:
            weights = np.ones_like(z)
        else:
            # error propagation: sd(z) = 2 c sd(c) / (c^2 - 1)
            sd_z = 2.0 * ck * np.maximum(count_errors[keep], 1e-6)
            sd_z = np.maximum(sd_z / (ck ** 2 - 1.0), 1e-3)
            weights = 1.0 / sd_z
        grid_best = _line_collapse(sizes[keep], widths[keep], z, weights)

    if grid_best is not None:
        _, nu0, wam0, b0, lna0 = grid_best
        zk = np.log(counts[keep] ** 2 - 1.0)
        sk, wk = sizes[keep], widths[keep]

        def z_residuals(theta):
            lna, b, nu, w_am = theta
            return (lna + b * sk ** (1.0 / nu) * (wk - w_am) - zk) * weights

        # refine inside one grid cell; the z objective is smooth there and
        # the box keeps the crossing at the collapse optimum
        x0 = (lna0, b0, nu0, wam0)
        lo = (-40.0, _FIT_LO[1], nu0 / 1.35, wam0 - 0.03)
        hi = (40.0, _FIT_HI[1], nu0 * 1.35, wam0 + 0.03)
        theta, _ = _bounded_lsq(z_residuals, x0, lo, hi)
        a, b, nu, w_am = (math.exp(theta[0]), float(theta[1]),
                          float(theta[2]), float(theta[3]))
        rms = float(np.sqrt(np.mean((model((a, b, nu, w_am)) - counts) ** 2)))
    else:
        theta, rms = _bounded_lsq(lambda t: model(t) - counts,
                                  _FIT_X0, _FIT_LO, _FIT_HI)
        a, b, nu, w_am = (float(v) for v in theta)
    return ScalingFit(a, b, nu, w_am, rms, int(sizes.size))
