"""Dissipative rate kernels and ensemble spin dynamics.

All frequencies are angular, in rad/us; two_pi_mhz converts an ordinary
frequency in MHz. The flip-rate kernel for an energy change delta_e has a
photon-sideband part, a Lorentzian ladder at multiples of the (red) cavity
detuning, plus an elastic peak near zero that a bath model broadens. The
ladder prefers energy-lowering flips, which is what makes the network relax.

Kernels are evaluated from closed forms; rate_by_quadrature integrates the
defining time correlators directly and exists as a slow validation oracle.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import IntegrationWarning, quad

from .connectivity import CouplingMatrix
from .errors import (
    DivergenceError,
    NumericError,
    ParameterError,
    ShapeError,
    StiffnessError,
)

__all__ = [
    "TWO_PI",
    "two_pi_mhz",
    "CavityParams",
    "ClassicalOhmic",
    "QuantumOhmic",
    "EnsembleState",
    "EventTrace",
    "MeanFieldTrajectory",
    "rate_confocal",
    "rate_classical_ohmic",
    "rate_quantum_ohmic",
    "rate_kernel",
    "rate_by_quadrature",
    "effective_temperature",
    "decoherence_half_time",
    "ensemble_flip_cost",
    "polarized_state",
    "unravel",
    "meanfield_rhs",
    "meanfield_integrate",
    "predict_flip_times",
    "events_to_csv",
    "trajectory_to_csv",
]

TWO_PI = 2.0 * math.pi

_SERIES_MAX = 500
_QUAD_LIMIT = 900
_MAX_CYCLES = 5000.0


def two_pi_mhz(frequency_mhz: float) -> float:
    """Convert an ordinary frequency in MHz to angular rad/us."""
    return TWO_PI * frequency_mhz


@dataclass(frozen=True)
class CavityParams:
    """Drive strength, cavity detuning and linewidth, and self-interaction.

    delta_c must be negative (red detuning); j_ii is the self-interaction
    energy scale that dresses the kernel with the factor exp(-j_ii/|delta_c|)
    and sets the sideband weight.
    """

    omega_z: float = TWO_PI * 0.01
    delta_c: float = -TWO_PI * 3.0
    kappa: float = TWO_PI * 0.15
    j_ii: float = 0.1 * TWO_PI * 3.0

    def __post_init__(self):
        if not np.isfinite(self.omega_z) or self.omega_z <= 0:
            raise ParameterError(f"omega_z must be > 0, got {self.omega_z}")
        if not np.isfinite(self.delta_c) or self.delta_c >= 0:
            raise ParameterError(
                f"delta_c must be negative (red detuned), got {self.delta_c}"
            )
        if not np.isfinite(self.kappa) or self.kappa <= 0:
            raise ParameterError(f"kappa must be > 0, got {self.kappa}")
        if not np.isfinite(self.j_ii) or self.j_ii < 0:
            raise ParameterError(f"j_ii must be >= 0, got {self.j_ii}")

    @property
    def jbar(self) -> float:
        return self.j_ii / abs(self.delta_c)


@dataclass(frozen=True)
class ClassicalOhmic:
    """Classical noise with logarithmic correlator growth alpha ln(1 + (w_c t)^2).

    Broadens the elastic peak into a Bessel-type profile of width omega_c.
    """

    alpha: float
    omega_c: float

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        if not np.isfinite(self.omega_c) or self.omega_c <= 0:
            raise ParameterError(f"omega_c must be > 0, got {self.omega_c}")


@dataclass(frozen=True)
class QuantumOhmic:
    """Zero-temperature ohmic bath with exponent alpha_q and cutoff omega_c.

    Its elastic peak is one-sided: only energy-lowering flips (delta_e < 0)
    are assisted.
    """

    alpha_q: float
    omega_c: float

    def __post_init__(self):
        if not np.isfinite(self.alpha_q) or self.alpha_q <= 0:
            raise ParameterError(f"alpha_q must be > 0, got {self.alpha_q}")
        if not np.isfinite(self.omega_c) or self.omega_c <= 0:
            raise ParameterError(f"omega_c must be > 0, got {self.omega_c}")


def _as_float_array(delta_e):
    arr = np.asarray(delta_e, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ParameterError("delta_e must be finite")
    return arr


def _sideband_series(de: np.ndarray, jbar: float, delta_c: float, kappa: float,
                     rtol: float) -> np.ndarray:
    """sum_{n>=1} (jbar^n/n!) n kappa / ((de - n delta_c)^2 + (n kappa)^2).

    Terms are added until the next term's pointwise relative contribution
    falls below rtol everywhere.
    """
    if jbar == 0.0:
        return np.zeros_like(de)
    scale = jbar
    acc = scale * kappa / ((de - delta_c) ** 2 + kappa * kappa)
    n = 1
    while True:
        n += 1
        if n > _SERIES_MAX:
            raise NumericError(
                f"sideband series did not truncate within {_SERIES_MAX} terms"
            )
        scale *= jbar / n
        term = scale * (n * kappa) / ((de - n * delta_c) ** 2 + (n * kappa) ** 2)
        if float((term / acc).max()) < rtol:
            break
        acc += term
    return acc


def _classical_peak_factor(de: np.ndarray, alpha: float, omega_c: float) -> np.ndarray:
    """Re int_0^inf exp(-i de t) (1 + (w_c t)^2)^(-alpha) dt, elementwise.

    Evaluated in log space through the scaled Bessel function so large
    alpha and large |de| neither overflow nor underflow prematurely. The
    de -> 0 limit is finite only for alpha > 1/2.
    """
    x = np.abs(de) / omega_c
    nu = alpha - 0.5
    out = np.empty_like(x)
    small = x < 1e-12
    if small.any():
        if alpha <= 0.5:
            raise DivergenceError(
                f"elastic peak diverges at delta_e = 0 for alpha = {alpha} <= 1/2"
            )
        out[small] = (
            math.sqrt(math.pi)
            * math.gamma(alpha - 0.5)
            / (2.0 * math.gamma(alpha) * omega_c)
        )
    big = ~small
    if big.any():
        xb = x[big]
        with np.errstate(divide="ignore", over="ignore"):
            log_kve = np.log(special.kve(nu, xb))
            log_val = (
                math.log(math.sqrt(math.pi) / math.gamma(alpha))
                + nu * np.log(xb / 2.0)
                + log_kve
                - xb
                - math.log(omega_c)
            )
        out[big] = np.exp(log_val)
    return out


def _quantum_peak_factor(de: np.ndarray, alpha_q: float, omega_c: float) -> np.ndarray:
    """One-sided peak: pi/(Gamma(a) w_c) e^(-x) x^(a-1) for de < 0, else 0.

    x = |de|/w_c. The step is right-continuous: exactly zero at de = 0 for
    alpha_q >= 1, divergent (an error) for alpha_q < 1.
    """
    out = np.zeros_like(de)
    if alpha_q < 1.0 and (de == 0.0).any():
        raise DivergenceError(
            f"one-sided peak diverges at delta_e = 0 for alpha_q = {alpha_q} < 1"
        )
    neg = de < 0.0
    if neg.any():
        x = np.abs(de[neg]) / omega_c
        amp = math.pi / (math.gamma(alpha_q) * omega_c)
        with np.errstate(divide="ignore"):
            out[neg] = amp * np.exp(-x + (alpha_q - 1.0) * np.log(x))
    return out


def _prefactor(params: CavityParams) -> float:
    return params.omega_z ** 2 / 8.0 * math.exp(-params.jbar)


def _shape(out: np.ndarray, template) -> float | np.ndarray:
    return out if np.asarray(template).ndim else float(out)


def rate_confocal(delta_e, params: CavityParams,
                  peak: ClassicalOhmic | None = None):
    """Single-sideband kernel: one Lorentzian at the cavity detuning.

    K = h(delta_e) + exp(-jbar) j_ii omega_z^2 kappa
        / (8 |delta_c| [(delta_e - delta_c)^2 + kappa^2])
    where h is the broadened elastic peak for the given model, or zero when
    peak is None (the bare elastic delta carries no weight away from 0 and
    is excluded).
    """
    de = _as_float_array(delta_e)
    pref = _prefactor(params)
    lorentz = (
        params.jbar
        * params.kappa
        / ((de - params.delta_c) ** 2 + params.kappa ** 2)
    )
    out = pref * lorentz
    if peak is not None:
        if not isinstance(peak, ClassicalOhmic):
            raise ParameterError("peak must be a ClassicalOhmic model or None")
        out = out + pref * _classical_peak_factor(de, peak.alpha, peak.omega_c)
    return _shape(out, delta_e)


def rate_classical_ohmic(delta_e, params: CavityParams, bath: ClassicalOhmic,
                         component: str = "full", series_rtol: float = 1e-12):
    """Full kernel for classical noise: broadened peak plus the sideband ladder.

    component selects "peak", "sidebands", or "full" (their sum); the ladder
    is truncated once the next term's relative contribution drops below
    series_rtol.
    """
    if not isinstance(bath, ClassicalOhmic):
        raise ParameterError("bath must be a ClassicalOhmic model")
    de = _as_float_array(delta_e)
    pref = _prefactor(params)
    parts = np.zeros_like(de)
    if component in ("peak", "full"):
        parts = parts + _classical_peak_factor(de, bath.alpha, bath.omega_c)
    if component in ("sidebands", "full"):
        parts = parts + _sideband_series(
            de, params.jbar, params.delta_c, params.kappa, series_rtol
        )
    if component not in ("peak", "sidebands", "full"):
        raise ParameterError(f"unknown component {component!r}")
    return _shape(pref * parts, delta_e)


def rate_quantum_ohmic(delta_e, params: CavityParams, bath: QuantumOhmic,
                       component: str = "full", series_rtol: float = 1e-12):
    """Full kernel for a zero-temperature ohmic bath.

    The one-sided peak is maximal at |delta_e| = (alpha_q - 1) omega_c for
    alpha_q > 1 and flattens into an exponential plateau at alpha_q = 1.
    """
    if not isinstance(bath, QuantumOhmic):
        raise ParameterError("bath must be a QuantumOhmic model")
    de = _as_float_array(delta_e)
    pref = _prefactor(params)
    parts = np.zeros_like(de)
    if component in ("peak", "full"):
        parts = parts + _quantum_peak_factor(de, bath.alpha_q, bath.omega_c)
    if component in ("sidebands", "full"):
        parts = parts + _sideband_series(
            de, params.jbar, params.delta_c, params.kappa, series_rtol
        )
    if component not in ("peak", "sidebands", "full"):
        raise ParameterError(f"unknown component {component!r}")
    return _shape(pref * parts, delta_e)


def rate_kernel(params: CavityParams, bath=None):
    """Vectorized kernel callable for the given bath specification.

    None selects the single-sideband kernel with no elastic peak;
    ClassicalOhmic and QuantumOhmic select their full kernels.
    """
    if bath is None:
        return lambda de: rate_confocal(de, params, None)
    if isinstance(bath, ClassicalOhmic):
        return lambda de: rate_classical_ohmic(de, params, bath)
    if isinstance(bath, QuantumOhmic):
        return lambda de: rate_quantum_ohmic(de, params, bath)
    raise ParameterError(f"unknown bath specification: {bath!r}")


def _quad_oscillatory(f, upper: float, freq: float, weight: str) -> float:
    if abs(freq) * upper > TWO_PI * _MAX_CYCLES:
        raise ParameterError(
            "quadrature window too oscillatory; "
            f"|delta_e| * window = {abs(freq) * upper:.3e} rad"
        )
    # Roundoff warnings are expected near the 1e-14 absolute floor; the
    # returned value is still the best available estimate.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        if freq == 0.0:
            if weight == "sin":
                return 0.0
            val, _ = quad(f, 0.0, upper, limit=_QUAD_LIMIT, epsabs=1e-14, epsrel=1e-11)
            return val
        val, _ = quad(
            f, 0.0, upper, weight=weight, wvar=abs(freq),
            limit=_QUAD_LIMIT, epsabs=1e-14, epsrel=1e-11, maxp1=100,
        )
    if weight == "sin" and freq < 0.0:
        val = -val
    return val


def rate_by_quadrature(delta_e: float, params: CavityParams,
                       bath: ClassicalOhmic | None = None,
                       component: str = "full") -> float:
    """Slow reference kernel: direct quadrature of the time correlators.

    Components: "sidebands" integrates exp(jbar e^((i delta_c - kappa) t)) - 1
    against exp(-i delta_e t); "peak" integrates the classical noise factor
    (1 + (w_c t)^2)^(-alpha); "full" sums the two; "full_noisy" keeps the
    noise factor under the sideband integrand as well, which the closed
    forms drop at leading order. Integration windows end where the envelope
    falls below 1e-14. Supports bath None (sidebands only) and
    ClassicalOhmic.
    """
    de = float(delta_e)
    jbar = params.jbar
    kappa = params.kappa
    delta_c = params.delta_c
    pref = _prefactor(params)
    if isinstance(bath, QuantumOhmic):
        raise ParameterError("quadrature oracle supports bath None or ClassicalOhmic")
    if bath is None and component != "sidebands":
        raise ParameterError("bath None has no elastic peak; use component='sidebands'")

    def g(t, part):
        z = jbar * np.exp((1j * delta_c - kappa) * t)
        val = np.exp(z) - 1.0
        return val.real if part == "re" else val.imag

    t_side = 33.0 / kappa
    total = 0.0
    if component in ("sidebands", "full"):
        total += _quad_oscillatory(lambda t: g(t, "re"), t_side, de, "cos")
        total += _quad_oscillatory(lambda t: g(t, "im"), t_side, de, "sin")
    if component in ("peak", "full"):
        alpha, omega_c = bath.alpha, bath.omega_c
        t_peak = math.sqrt(max(1e14 ** (1.0 / alpha) - 1.0, 0.0)) / omega_c

        def p(t):
            return (1.0 + (omega_c * t) ** 2) ** (-alpha)

        total += _quad_oscillatory(p, t_peak, de, "cos")
    if component == "full_noisy":
        alpha, omega_c = bath.alpha, bath.omega_c
        t_peak = math.sqrt(max(1e14 ** (1.0 / alpha) - 1.0, 0.0)) / omega_c
        t_up = min(t_peak, t_side)

        def q(t, part):
            z = jbar * np.exp((1j * delta_c - kappa) * t)
            val = np.exp(z) * (1.0 + (omega_c * t) ** 2) ** (-alpha)
            return val.real if part == "re" else val.imag

        total += _quad_oscillatory(lambda t: q(t, "re"), t_up, de, "cos")
        total += _quad_oscillatory(lambda t: q(t, "im"), t_up, de, "sin")
    elif component not in ("sidebands", "peak", "full"):
        raise ParameterError(f"unknown component {component!r}")
    return pref * total


def effective_temperature(params: CavityParams) -> float:
    """Temperature the sideband kernel thermalizes small energy changes to:
    (delta_c^2 + kappa^2) / (4 |delta_c|)."""
    return (params.delta_c ** 2 + params.kappa ** 2) / (4.0 * abs(params.delta_c))


def decoherence_half_time(alpha: float, omega_c: float,
                          delta_s: float = 1.0) -> float:
    """Time for classical noise to halve a coherence split by delta_s.

    Inverts (1 + (w_c t)^2)^(-alpha delta_s^2 / 2 pi) = 1/2.
    """
    if not np.isfinite(alpha) or alpha <= 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    if not np.isfinite(omega_c) or omega_c <= 0:
        raise ParameterError(f"omega_c must be > 0, got {omega_c}")
    if not np.isfinite(delta_s) or delta_s <= 0:
        raise ParameterError(f"delta_s must be > 0, got {delta_s}")
    expo = TWO_PI / (alpha * delta_s * delta_s)
    return math.sqrt(2.0 ** expo - 1.0) / omega_c


# ---------------------------------------------------------------------------
# ensemble dynamics


@dataclass(frozen=True)
class EnsembleState:
    """Per-ensemble magnetizations m in [-1, 1], shared spin length, time."""

    m: np.ndarray
    s_mag: float
    time: float = 0.0

    def __post_init__(self):
        m = np.ascontiguousarray(self.m, dtype=np.float64)
        if m.ndim != 1 or m.size == 0:
            raise ShapeError(f"m must be a nonempty 1-D array, got shape {m.shape}")
        if not np.isfinite(m).all():
            raise ParameterError("magnetizations must be finite")
        if np.abs(m).max() > 1.0 + 1e-12:
            raise ParameterError("magnetizations must lie in [-1, 1]")
        m = np.clip(m, -1.0, 1.0)
        if not np.isfinite(self.s_mag) or self.s_mag < 0.5:
            raise ParameterError(f"s_mag must be >= 1/2, got {self.s_mag}")
        if not np.isfinite(self.time):
            raise ParameterError(f"time must be finite, got {self.time}")
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.m.shape[0]


def polarized_state(spins, s_mag: float, time: float = 0.0) -> EnsembleState:
    """Fully polarized ensemble state along a binary configuration."""
    arr = np.asarray(spins, dtype=np.float64)
    if not np.isin(arr, (-1.0, 1.0)).all():
        raise ShapeError("spins must be +-1")
    return EnsembleState(arr, float(s_mag), float(time))


@dataclass(frozen=True)
class EventTrace:
    """Unraveled jump record: event times, ensemble indices, +-1 directions."""

    times: np.ndarray
    indices: np.ndarray
    directions: np.ndarray
    final: EnsembleState

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        dirs = np.ascontiguousarray(self.directions, dtype=np.int8)
        if not (times.shape == idx.shape == dirs.shape) or times.ndim != 1:
            raise ShapeError("times, indices, directions must be equal-length 1-D")
        if times.size and (np.diff(times) <= 0).any():
            raise ParameterError("event times must be strictly increasing")
        if not np.isin(dirs, (-1, 1)).all() and dirs.size:
            raise ParameterError("directions must be +-1")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "directions", dirs)

    @property
    def n_events(self) -> int:
        return self.times.size


def _check_coupling_state(coupling: CouplingMatrix, state: EnsembleState):
    if coupling.n != state.n:
        raise ShapeError(
            f"coupling is {coupling.n}x{coupling.n} but state has {state.n} ensembles"
        )


def ensemble_flip_cost(state: EnsembleState, coupling: CouplingMatrix, i: int,
                       direction: int) -> float:
    """Energy change per unit spin raised (+1) or lowered (-1) on ensemble i.

    delta_e = -J_ii - 2 * direction * sum_j J_ij S m_j, with the sum running
    over every j including i: the ensemble interacts with its own mean field.
    """
    _check_coupling_state(coupling, state)
    if direction not in (-1, 1):
        raise ParameterError(f"direction must be +-1, got {direction}")
    if not 0 <= i < state.n:
        raise ParameterError(f"ensemble index {i} out of range")
    sx = state.s_mag * state.m
    ell = float(coupling.values[i] @ sx)
    return float(-coupling.values[i, i] - 2.0 * direction * ell)


def _rates(m, s_mag, values, diag, kernel):
    sx = s_mag * m
    ell = values @ sx
    de_up = -diag - 2.0 * ell
    de_dn = -diag + 2.0 * ell
    f_up = s_mag * (s_mag + 1.0) - sx * (sx + 1.0)
    f_dn = s_mag * (s_mag + 1.0) - sx * (sx - 1.0)
    r_up = np.maximum(f_up, 0.0) * kernel(de_up)
    r_dn = np.maximum(f_dn, 0.0) * kernel(de_dn)
    return r_up, r_dn, ell


def unravel(initial: EnsembleState, coupling: CouplingMatrix,
            params: CavityParams, bath, t_max: float,
            rng: np.random.Generator, max_events: int = 1_000_000) -> EventTrace:
    """Event-driven stochastic unraveling of the ensemble master equation.

    Each step draws an exponential waiting time per (ensemble, direction)
    from the superradiant rates [S(S+1) - s(s +- 1)] K(delta_e); the minimum
    fires, moves that ensemble's spin projection by one unit, and all rates
    are recomputed. Stops at t_max or when the total rate falls below 1e-30.
    """
    _check_coupling_state(coupling, initial)
    if not np.isfinite(t_max) or t_max <= 0:
        raise ParameterError(f"t_max must be finite and > 0, got {t_max}")
    kernel = rate_kernel(params, bath)
    values = coupling.values
    diag = np.diagonal(values).copy()
    s_mag = initial.s_mag
    m = initial.m.copy()
    t = initial.time
    times: list[float] = []
    indices: list[int] = []
    directions: list[int] = []
    for _ in range(max_events):
        r_up, r_dn, _ = _rates(m, s_mag, values, diag, kernel)
        total = float(r_up.sum() + r_dn.sum())
        if total < 1e-30:
            break
        u = rng.random((m.size, 2))
        with np.errstate(divide="ignore"):
            t_up = np.where(r_up > 0.0, -np.log(u[:, 0]) / r_up, np.inf)
            t_dn = np.where(r_dn > 0.0, -np.log(u[:, 1]) / r_dn, np.inf)
        i_up = int(np.argmin(t_up))
        i_dn = int(np.argmin(t_dn))
        if t_up[i_up] <= t_dn[i_dn]:
            wait, i, direction = float(t_up[i_up]), i_up, 1
        else:
            wait, i, direction = float(t_dn[i_dn]), i_dn, -1
        if t + wait > t_max:
            t = t_max
            break
        t = t + wait
        sx_i = s_mag * m[i] + direction
        m[i] = sx_i / s_mag
        times.append(t)
        indices.append(i)
        directions.append(direction)
    else:
        raise NumericError(f"unraveling exceeded {max_events} events")
    return EventTrace(
        np.asarray(times),
        np.asarray(indices, dtype=np.int64),
        np.asarray(directions, dtype=np.int8),
        EnsembleState(m, s_mag, t),
    )


def meanfield_rhs(m, s_mag: float, coupling: CouplingMatrix,
                  params: CavityParams, bath=None):
    """Mean-field drift of the magnetizations, plus the two kernel arrays.

    dm_i/dt = sgn(l_i) S |K+ - K-| (1 - m_i^2) + K+ (1 - m_i) - K- (1 + m_i)
    with l_i = sum_j J_ij S m_j and K+- evaluated at the raise/lower costs.
    """
    kernel = rate_kernel(params, bath)
    values = coupling.values
    diag = np.diagonal(values).copy()
    m = np.asarray(m, dtype=np.float64)
    sx = s_mag * m
    ell = values @ sx
    kp = kernel(-diag - 2.0 * ell)
    km = kernel(-diag + 2.0 * ell)
    drift = (
        np.sign(ell) * s_mag * np.abs(kp - km) * (1.0 - m * m)
        + kp * (1.0 - m)
        - km * (1.0 + m)
    )
    return drift, kp, km


@dataclass(frozen=True)
class MeanFieldTrajectory:
    """Accepted integrator states: times (T,) and magnetizations (T, n)."""

    times: np.ndarray
    m: np.ndarray
    final: EnsembleState


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def meanfield_integrate(initial: EnsembleState, coupling: CouplingMatrix,
                        params: CavityParams, bath, t_max: float,
                        tol: float = 1e-8) -> MeanFieldTrajectory:
    """Adaptive explicit integration of the mean-field equations to t_max.

    Embedded 5(4) pairs control the per-step absolute error to tol; the
    step may at most double between accepted steps, and while any ensemble
    is mid-flip (|m| < 0.999) it is additionally capped at
    0.01 / (S max|K+ - K-|) so a flip is resolved by many steps.
    Magnetizations are clamped to [-1, 1] after every accepted step. A step
    size below 1e-12 us raises StiffnessError.
    """
    _check_coupling_state(coupling, initial)
    if not np.isfinite(t_max) or t_max <= initial.time:
        raise ParameterError(
            f"t_max must be finite and > initial time, got {t_max}"
        )
    s_mag = initial.s_mag

    def rhs(y):
        return meanfield_rhs(y, s_mag, coupling, params, bath)

    t = initial.time
    y = initial.m.copy()
    times = [t]
    history = [y.copy()]
    drift, kp, km = rhs(y)
    h = 1e-6
    while t < t_max:
        # cap only against the kernel difference of mid-flip ensembles
        mid = np.abs(y) < 0.999
        if mid.any():
            rate_scale = float(s_mag * np.abs(kp - km)[mid].max())
            if rate_scale > 0.0:
                h = min(h, 0.01 / rate_scale)
        h = min(h, t_max - t)
        if h < 1e-12:
            raise StiffnessError(
                f"step size underflow ({h:.3e} us) at t = {t:.6f} us"
            )
        stages = [drift]
        for i in range(1, 7):
            yi = y + h * sum(a * s for a, s in zip(_DP_A[i], stages))
            di, _, _ = rhs(yi)
            stages.append(di)
        y5 = y + h * sum(b * s for b, s in zip(_DP_B5, stages) if b != 0.0)
        y4 = y + h * sum(b * s for b, s in zip(_DP_B4, stages) if b != 0.0)
        err = float(np.abs(y5 - y4).max())
        if err <= tol:
            t = t + h
            y = np.clip(y5, -1.0, 1.0)
            times.append(t)
            history.append(y.copy())
            drift, kp, km = rhs(y)
            factor = 2.0 if err == 0.0 else min(2.0, max(0.2, 0.9 * (tol / err) ** 0.2))
            h = h * factor
        else:
            h = h * max(0.2, 0.9 * (tol / err) ** 0.2)
    final = EnsembleState(y, s_mag, t)
    return MeanFieldTrajectory(np.asarray(times), np.asarray(history), final)


def predict_flip_times(state: EnsembleState, coupling: CouplingMatrix,
                       params: CavityParams, bath=None) -> np.ndarray:
    """Mean-field flip-time estimate per ensemble.

    t_i = -sgn(l_i m_i) ln(8 S) / (8 S |K+ - K-|). Negative values mean the
    ensemble is aligned with its field and will not flip; +inf means the
    kernel difference vanishes and it never flips.
    """
    _check_coupling_state(coupling, state)
    kernel = rate_kernel(params, bath)
    values = coupling.values
    diag = np.diagonal(values).copy()
    s_mag = state.s_mag
    sx = s_mag * state.m
    ell = values @ sx
    kp = kernel(-diag - 2.0 * ell)
    km = kernel(-diag + 2.0 * ell)
    dk = np.abs(kp - km)
    amp = 8.0 * s_mag
    with np.errstate(divide="ignore"):
        out = np.where(
            dk > 0.0,
            -np.sign(ell * state.m) * math.log(amp) / (amp * dk),
            np.inf,
        )
    return out


def events_to_csv(trace: EventTrace, path) -> None:
    """Write jump events as (time, index, direction) rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "index", "direction"])
        for t, i, d in zip(trace.times, trace.indices, trace.directions):
            writer.writerow([repr(float(t)), int(i), int(d)])


def trajectory_to_csv(traj: MeanFieldTrajectory, path) -> None:
    """Write magnetizations as (time, m_1, ..., m_n) rows."""
    n = traj.m.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [f"m_{i + 1}" for i in range(n)])
        for t, row in zip(traj.times, traj.m):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
