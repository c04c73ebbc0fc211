"""Typed experiment configuration with strict YAML loading.

Every experiment has a frozen parameter dataclass whose fields define the
accepted keys; unknown keys anywhere in the file are hard errors so typos
cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import yaml

from ..errors import ConfigError

__all__ = [
    "ExperimentConfig",
    "EXPERIMENT_NAMES",
    "default_config",
    "load_config",
    "dump_config",
    "config_to_dict",
    "config_from_dict",
    "validate",
]


@dataclass(frozen=True)
class Fig3Params:
    """Coupling-statistics histograms plus sign/frustration fractions."""

    hist_widths: tuple = (0.5, 1.0, 4.0)
    n_pairs: int = 1_000_000
    bins: int = 101
    curve_widths: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8,
                           1.0, 1.5, 2.0, 3.0, 4.0)
    n_triples: int = 200_000


@dataclass(frozen=True)
class Fig4Params:
    """Metastable-state counting and the transition-width fit."""

    sizes: tuple = (100, 200, 400)
    widths: tuple = (0.5, 0.527, 0.555, 0.582, 0.609, 0.636,
                     0.664, 0.691, 0.718, 0.745, 0.773, 0.8)
    n_seeds: int = 500
    realizations: int = 64


@dataclass(frozen=True)
class Fig5Params:
    """Spectral statistics at large width plus the collapse scan."""

    rm_width: float = 12.0
    rm_n: int = 1000
    rm_realizations: int = 10
    sk_realizations: int = 10
    collapse_sizes: tuple = (100, 300, 1000)
    collapse_widths: tuple = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    collapse_trials: int = 5
    exponents: tuple = (-3.0, -4.0, -5.0)


@dataclass(frozen=True)
class Fig6Params:
    """Staggered-healing scenario comparing three dynamics."""

    n: int = 20
    ensemble_size: float = 1000.0
    width: float = 1.5
    n_members: int = 5
    replicas: int = 20
    quenches: int = 60
    layout_budget: int = 40
    t_max_cap: float = 50_000.0
    delta_c: float | None = None
    kappa: float | None = None
    omega_z: float | None = None
    j_ii: float | None = None


@dataclass(frozen=True)
class Fig7Params:
    """Recall curves and basin sizes for classical learning rules."""

    n: int = 100
    recall_ratio: float = 0.6
    recall_trials: int = 40
    recall_max_d: int = 40
    pseudoinverse_ratios: tuple = (0.1, 0.2, 0.4, 0.6, 0.8)
    hebbian_n: int = 200
    hebbian_ratios: tuple = (0.05, 0.1, 0.138, 0.2, 0.3, 0.5)
    patterns_per_point: int = 20
    basin_trials: int = 20


@dataclass(frozen=True)
class Fig8Params:
    """Basin-size scaling with system size for Gaussian couplings."""

    sizes: tuple = (100, 200, 400)
    realizations: int = 10
    seeds_per_realization: int = 100
    basin_trials: int = 20


@dataclass(frozen=True)
class Fig9Params:
    """Basin size versus width for the cavity connectivity."""

    n: int = 100
    widths: tuple = (0.5, 0.7, 0.8, 1.0, 1.5, 2.0, 3.0, 4.0)
    realizations: int = 6
    seeds_per_realization: int = 50
    basin_trials: int = 20
    dist_widths: tuple = (1.5, 4.0)


@dataclass(frozen=True)
class Fig10Params:
    """Encoded-pattern capacity sweep with learning-rule baselines."""

    n: int = 200
    ratios: tuple = (0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0)
    width: float = 1.5
    trials: int = 20
    regularization: float | None = None
    include_hebbian: bool = True
    include_pseudoinverse: bool = True
    # near full loading, realizations without N independent reachable
    # states are discarded and redrawn up to this many times
    layout_retries: int = 120


@dataclass(frozen=True)
class Fig11Params:
    """Stored-state robustness against placement and atom noise."""

    sizes: tuple = (50, 100)
    widths: tuple = (0.5, 1.0, 2.0, 4.0)
    trials: int = 20
    position_sigma_um: float = 1.0
    waist_um: float = 35.0
    total_atoms: float = 1_000_000.0


@dataclass(frozen=True)
class RatesParams:
    """Tabulated flip-rate kernels over an energy grid."""

    grid_lo: float = -25.0
    grid_hi: float = 25.0
    grid_count: int = 501
    temperature: float | None = None
    delta_c: float | None = None
    kappa: float | None = None
    omega_z: float | None = None
    j_ii: float | None = None
    classical_alpha: float | None = None
    classical_omega_c: float | None = None
    quantum_alpha: float | None = None
    quantum_omega_c: float | None = None


_PARAM_TYPES = {
    "fig3-couplings": Fig3Params,
    "fig4-metastable": Fig4Params,
    "fig5-spectra": Fig5Params,
    "fig6-dynamics": Fig6Params,
    "fig7-hopfield-basins": Fig7Params,
    "fig8-sk-basins": Fig8Params,
    "fig9-ccqed-basins": Fig9Params,
    "fig10-capacity": Fig10Params,
    "fig11-chaos": Fig11Params,
    "rates-table": RatesParams,
}

EXPERIMENT_NAMES = tuple(_PARAM_TYPES)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run: name, seeding, parallelism, and parameters."""

    experiment: str
    base_seed: int = 20260501
    workers: int = 1
    out: str | None = None
    params: object = None

    def __post_init__(self):
        if self.experiment not in _PARAM_TYPES:
            known = ", ".join(EXPERIMENT_NAMES)
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {known}")
        if self.params is None:
            object.__setattr__(self, "params", _PARAM_TYPES[self.experiment]())
        elif not isinstance(self.params, _PARAM_TYPES[self.experiment]):
            raise ConfigError(
                f"params for {self.experiment} must be "
                f"{_PARAM_TYPES[self.experiment].__name__}")
        if not isinstance(self.base_seed, int) or isinstance(self.base_seed, bool):
            raise ConfigError(f"base_seed must be an integer, got {self.base_seed!r}")
        if self.base_seed < 0:
            raise ConfigError(f"base_seed must be >= 0, got {self.base_seed}")
        if not isinstance(self.workers, int) or isinstance(self.workers, bool):
            raise ConfigError(f"workers must be an integer, got {self.workers!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


def default_config(experiment: str, base_seed: int = 20260501,
                   workers: int = 1, out: str | None = None) -> ExperimentConfig:
    """Desk-scale configuration for the named experiment."""
    return ExperimentConfig(experiment=experiment, base_seed=base_seed,
                            workers=workers, out=out)


def _coerce(name: str, value, target_type, experiment: str):
    origin = getattr(target_type, "__origin__", None)
    if target_type is float or target_type == float | None:
        if value is None and target_type == float | None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(
                f"{experiment}.{name} must be a number, got {value!r}")
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(
                f"{experiment}.{name} must be an integer, got {value!r}")
        return value
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(
                f"{experiment}.{name} must be a boolean, got {value!r}")
        return value
    if target_type is tuple or origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(
                f"{experiment}.{name} must be a list, got {value!r}")
        out = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(
                    f"{experiment}.{name} entries must be numbers, got {item!r}")
            out.append(item)
        return tuple(out)
    return value


def _params_from_dict(experiment: str, raw: dict):
    cls = _PARAM_TYPES[experiment]
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(
            f"unknown parameter key(s) for {experiment}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in raw.items():
        spec = known[name]
        default = spec.default
        if isinstance(default, tuple) or default is None:
            target = tuple if isinstance(default, tuple) else float | None
        else:
            target = type(default)
        kwargs[name] = _coerce(name, value, target, experiment)
    return cls(**kwargs)


_TOP_KEYS = ("experiment", "base_seed", "workers", "out", "params")


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from a plain mapping, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigError(f"configuration must be a mapping, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(_TOP_KEYS))
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("configuration must name an experiment")
    experiment = raw["experiment"]
    if experiment not in _PARAM_TYPES:
        known = ", ".join(EXPERIMENT_NAMES)
        raise ConfigError(
            f"unknown experiment {experiment!r}; expected one of {known}")
    params_raw = raw.get("params") or {}
    if not isinstance(params_raw, dict):
        raise ConfigError("params must be a mapping")
    kwargs = {}
    if "base_seed" in raw:
        kwargs["base_seed"] = raw["base_seed"]
    if "workers" in raw:
        kwargs["workers"] = raw["workers"]
    if "out" in raw and raw["out"] is not None:
        if not isinstance(raw["out"], str):
            raise ConfigError(f"out must be a string path, got {raw['out']!r}")
        kwargs["out"] = raw["out"]
    return ExperimentConfig(experiment=experiment,
                            params=_params_from_dict(experiment, params_raw),
                            **kwargs)


def load_config(path) -> ExperimentConfig:
    """Parse a YAML configuration file with strict key checking."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if raw is None:
        raise ConfigError(f"config {path} is empty")
    return config_from_dict(raw)


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-dict snapshot that round-trips through config_from_dict."""
    params = {}
    for spec in fields(type(config.params)):
        value = getattr(config.params, spec.name)
        params[spec.name] = list(value) if isinstance(value, tuple) else value
    return {
        "experiment": config.experiment,
        "base_seed": config.base_seed,
        "workers": config.workers,
        "out": config.out,
        "params": params,
    }


def dump_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=False)


def _positive(report, label, value):
    if value <= 0:
        report.append(f"{label} must be > 0, got {value}")


def _nonempty(report, label, grid):
    if len(grid) == 0:
        report.append(f"{label} must be nonempty")


def validate(config: ExperimentConfig) -> list[str]:
    """Static sanity checks; returns a list of violations (empty = valid)."""
    report: list[str] = []
    p = config.params
    name = config.experiment
    if name == "fig3-couplings":
        _nonempty(report, "hist_widths", p.hist_widths)
        _nonempty(report, "curve_widths", p.curve_widths)
        for w in tuple(p.hist_widths) + tuple(p.curve_widths):
            if w <= 0:
                report.append(f"widths must be > 0, got {w}")
        _positive(report, "n_pairs", p.n_pairs)
        _positive(report, "n_triples", p.n_triples)
        if p.bins < 3:
            report.append(f"bins must be >= 3, got {p.bins}")
    elif name == "fig4-metastable":
        _nonempty(report, "sizes", p.sizes)
        _nonempty(report, "widths", p.widths)
        if len(p.widths) < 4:
            report.append("widths must hold at least 4 points for the fit")
        if len(p.sizes) < 2:
            report.append("sizes must hold at least 2 entries for the fit")
        _positive(report, "n_seeds", p.n_seeds)
        _positive(report, "realizations", p.realizations)
    elif name == "fig5-spectra":
        _positive(report, "rm_width", p.rm_width)
        _positive(report, "rm_n", p.rm_n)
        _positive(report, "rm_realizations", p.rm_realizations)
        _positive(report, "sk_realizations", p.sk_realizations)
        _nonempty(report, "collapse_widths", p.collapse_widths)
        if len(p.collapse_sizes) < 2:
            report.append("collapse_sizes needs >= 2 sizes")
        _positive(report, "collapse_trials", p.collapse_trials)
        _nonempty(report, "exponents", p.exponents)
    elif name == "fig6-dynamics":
        if p.n < 3:
            report.append(f"n must be >= 3, got {p.n}")
        if p.ensemble_size < 1:
            report.append(f"ensemble_size must be >= 1, got {p.ensemble_size}")
        _positive(report, "width", p.width)
        if not 1 <= p.n_members < p.n:
            report.append(f"n_members must be in [1, n), got {p.n_members}")
        _positive(report, "replicas", p.replicas)
        _positive(report, "quenches", p.quenches)
        _positive(report, "layout_budget", p.layout_budget)
        _positive(report, "t_max_cap", p.t_max_cap)
        if p.delta_c is not None and p.delta_c >= 0:
            report.append("blue detuning unsupported: delta_c must be < 0")
        if p.kappa is not None and p.kappa <= 0:
            report.append(f"kappa must be > 0, got {p.kappa}")
        if p.omega_z is not None and p.omega_z <= 0:
            report.append(f"omega_z must be > 0, got {p.omega_z}")
        if p.j_ii is not None and p.j_ii < 0:
            report.append(f"j_ii must be >= 0, got {p.j_ii}")
    elif name == "fig7-hopfield-basins":
        if p.n < 2:
            report.append(f"n must be >= 2, got {p.n}")
        if not 0 < p.recall_ratio <= 1:
            report.append(f"recall_ratio must be in (0, 1], got {p.recall_ratio}")
        _positive(report, "recall_trials", p.recall_trials)
        _positive(report, "recall_max_d", p.recall_max_d)
        _nonempty(report, "pseudoinverse_ratios", p.pseudoinverse_ratios)
        _nonempty(report, "hebbian_ratios", p.hebbian_ratios)
        for r in tuple(p.pseudoinverse_ratios) + tuple(p.hebbian_ratios):
            if not 0 < r <= 1:
                report.append(f"ratios must be in (0, 1], got {r}")
        _positive(report, "patterns_per_point", p.patterns_per_point)
        _positive(report, "basin_trials", p.basin_trials)
    elif name == "fig8-sk-basins":
        _nonempty(report, "sizes", p.sizes)
        _positive(report, "realizations", p.realizations)
        _positive(report, "seeds_per_realization", p.seeds_per_realization)
        _positive(report, "basin_trials", p.basin_trials)
    elif name == "fig9-ccqed-basins":
        if p.n < 2:
            report.append(f"n must be >= 2, got {p.n}")
        _nonempty(report, "widths", p.widths)
        _positive(report, "realizations", p.realizations)
        _positive(report, "seeds_per_realization", p.seeds_per_realization)
        _positive(report, "basin_trials", p.basin_trials)
    elif name == "fig10-capacity":
        if p.n < 2:
            report.append(f"n must be >= 2, got {p.n}")
        _nonempty(report, "ratios", p.ratios)
        for r in p.ratios:
            if not 0 < r <= 1:
                report.append(f"ratios must be in (0, 1], got {r}")
        _positive(report, "width", p.width)
        _positive(report, "trials", p.trials)
        if p.regularization is not None and p.regularization <= 0:
            report.append(
                f"regularization must be > 0, got {p.regularization}")
    elif name == "fig11-chaos":
        _nonempty(report, "sizes", p.sizes)
        _nonempty(report, "widths", p.widths)
        _positive(report, "trials", p.trials)
        if p.position_sigma_um < 0:
            report.append(
                f"position_sigma_um must be >= 0, got {p.position_sigma_um}")
        _positive(report, "waist_um", p.waist_um)
        _positive(report, "total_atoms", p.total_atoms)
    elif name == "rates-table":
        if p.grid_count < 2:
            report.append(f"grid_count must be >= 2, got {p.grid_count}")
        if not p.grid_lo < p.grid_hi:
            report.append(
                f"grid_lo must be < grid_hi, got [{p.grid_lo}, {p.grid_hi}]")
        if p.temperature is not None and p.temperature <= 0:
            report.append(f"temperature must be > 0, got {p.temperature}")
        if p.delta_c is not None and p.delta_c >= 0:
            report.append("blue detuning unsupported: delta_c must be < 0")
        if p.kappa is not None and p.kappa <= 0:
            report.append(f"kappa must be > 0, got {p.kappa}")
        if p.omega_z is not None and p.omega_z <= 0:
            report.append(f"omega_z must be > 0, got {p.omega_z}")
        if p.j_ii is not None and p.j_ii < 0:
            report.append(f"j_ii must be >= 0, got {p.j_ii}")
        half_pairs = (
            (p.classical_alpha, p.classical_omega_c, "classical"),
            (p.quantum_alpha, p.quantum_omega_c, "quantum"),
        )
        for alpha, omega_c, label in half_pairs:
            if (alpha is None) != (omega_c is None):
                report.append(
                    f"{label}_alpha and {label}_omega_c must be set together")
            if alpha is not None and alpha <= 0:
                report.append(f"{label}_alpha must be > 0, got {alpha}")
            if omega_c is not None and omega_c <= 0:
                report.append(f"{label}_omega_c must be > 0, got {omega_c}")
    return report
