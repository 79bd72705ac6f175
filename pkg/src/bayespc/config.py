"""Experiment configuration: dataclasses plus a validating JSON loader."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

BASIS_FAMILIES = ("legendre", "hermite")
INDEX_SCHEMES = ("total_order", "tensor_grid", "hyperbolic_cross")
PRIOR_KINDS = ("zero_gaussian", "informed_gaussian", "horseshoe", "hierarchical_gaussian")
VALUE_SOURCES = ("data_mean", "literal")


@dataclass(frozen=True)
class BasisConfig:
    family: str = "legendre"
    scheme: str = "total_order"
    max_degree: int = 3

    def __post_init__(self):
        if self.family not in BASIS_FAMILIES:
            raise ConfigError(f"basis.family must be one of {BASIS_FAMILIES}")
        if self.scheme not in INDEX_SCHEMES:
            raise ConfigError(f"basis.scheme must be one of {INDEX_SCHEMES}")
        if self.max_degree < 0:
            raise ConfigError("basis.max_degree must be >= 0")


@dataclass(frozen=True)
class PriorConfig:
    kind: str = "zero_gaussian"
    variance: float = 1.0
    coefficients_path: str | None = None   # informed_gaussian only
    nu: float = 25.0                       # horseshoe only
    s: float = 3.0
    beta: float = 0.1

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ConfigError(f"prior.kind must be one of {PRIOR_KINDS}")
        if self.variance <= 0:
            raise ConfigError("prior.variance must be positive")
        if self.kind == "informed_gaussian" and not self.coefficients_path:
            raise ConfigError("informed_gaussian prior needs prior.coefficients_path")
        if self.kind == "horseshoe":
            if self.nu <= 0 or self.s <= 0:
                raise ConfigError("horseshoe prior needs nu > 0 and s > 0")
            if not 0.0 < self.beta < 1.0:
                raise ConfigError("horseshoe prior needs beta in (0, 1)")


@dataclass(frozen=True)
class ConditioningConfig:
    functional: str = "spatial_mean"
    value_source: str = "data_mean"
    value: float | None = None
    value_variance: float = 0.0

    def __post_init__(self):
        if self.functional != "spatial_mean":
            raise ConfigError("only the spatial_mean functional is configurable")
        if self.value_source not in VALUE_SOURCES:
            raise ConfigError(f"conditioning.value_source must be one of {VALUE_SOURCES}")
        if self.value_source == "literal" and self.value is None:
            raise ConfigError("literal conditioning needs conditioning.value")
        if self.value_variance < 0:
            raise ConfigError("conditioning.value_variance must be >= 0")


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 2
    warmup: int = 500
    draws: int = 500
    seed: int = 0
    target_accept: float = 0.8
    max_leapfrog: int = 24

    def __post_init__(self):
        if self.chains < 2:
            raise ConfigError("mcmc.chains must be >= 2")
        if self.warmup < 100:
            raise ConfigError("mcmc.warmup must be >= 100")
        if self.draws < 1:
            raise ConfigError("mcmc.draws must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigError("mcmc.target_accept must lie in (0, 1)")
        if self.max_leapfrog < 1:
            raise ConfigError("mcmc.max_leapfrog must be >= 1")


@dataclass(frozen=True)
class SplitConfig:
    train_count: int | None = None
    train_fraction: float | None = None
    train_counts: tuple[int, ...] | None = None  # sweep over sizes
    n_trials: int = 20
    seed: int = 0

    def __post_init__(self):
        chosen = [v is not None for v in (self.train_count, self.train_fraction, self.train_counts)]
        if sum(chosen) != 1:
            raise ConfigError(
                "specify exactly one of split.train_count, split.train_fraction, split.train_counts"
            )
        if self.train_fraction is not None and not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("split.train_fraction must lie in (0, 1)")
        if self.train_count is not None and self.train_count < 1:
            raise ConfigError("split.train_count must be >= 1")
        if self.train_counts is not None:
            counts = tuple(int(c) for c in self.train_counts)
            if not counts or any(c < 1 for c in counts):
                raise ConfigError("split.train_counts must be a nonempty list of positives")
            object.__setattr__(self, "train_counts", counts)
        if self.n_trials < 1:
            raise ConfigError("split.n_trials must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_paths: tuple[str, ...]
    input_bounds: tuple[tuple[float, float], ...] | None
    basis: BasisConfig
    prior: PriorConfig
    noise_variance: float
    split: SplitConfig
    conditioning: ConditioningConfig | None = None
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    predict_inputs_path: str | None = None
    oracle_coefficients_path: str | None = None
    oracle_samples: int = 1_000_000
    compare_zero_prior: bool = True   # paired columns for informed runs
    compare_unconditioned: bool = True

    def __post_init__(self):
        if not self.dataset_paths:
            raise ConfigError("at least one dataset path is required")
        if self.noise_variance <= 0:
            raise ConfigError("noise_variance must be positive")
        if self.input_bounds is not None:
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.input_bounds)
            if any(lo >= hi for lo, hi in bounds):
                raise ConfigError("each input bound must satisfy lower < upper")
            object.__setattr__(self, "input_bounds", bounds)
        if self.oracle_samples < 1000:
            raise ConfigError("oracle_samples must be >= 1000")

    def resolve_paths(self, base: Path) -> "ExperimentConfig":
        """Interpret relative paths against the config file's directory."""
        from dataclasses import replace

        def fix(p):
            return str((base / p).resolve()) if p and not Path(p).is_absolute() else p

        prior = self.prior
        if prior.coefficients_path:
            prior = replace(prior, coefficients_path=fix(prior.coefficients_path))
        return replace(
            self,
            dataset_paths=tuple(fix(p) for p in self.dataset_paths),
            predict_inputs_path=fix(self.predict_inputs_path),
            oracle_coefficients_path=fix(self.oracle_coefficients_path),
            prior=prior,
        )


def _build(section_cls, payload, where):
    if payload is None:
        return None
    if not isinstance(payload, dict):
        raise ConfigError(f"{where} must be a JSON object")
    valid = set(section_cls.__dataclass_fields__)
    unknown = set(payload) - valid
    if unknown:
        raise ConfigError(f"{where} has unknown keys: {sorted(unknown)}")
    try:
        return section_cls(**payload)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: dict, base: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    known = {
        "dataset", "datasets", "input_bounds", "basis", "prior", "noise_variance",
        "split", "conditioning", "mcmc", "predict_inputs_path",
        "oracle_coefficients_path", "oracle_samples",
        "compare_zero_prior", "compare_unconditioned",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")

    if "dataset" in raw and "datasets" in raw:
        raise ConfigError("specify either dataset or datasets, not both")
    if "dataset" in raw:
        paths = (raw["dataset"],)
    elif "datasets" in raw:
        entries = raw["datasets"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("datasets must be a nonempty list of paths")
        paths = tuple(entries)
    else:
        raise ConfigError("a dataset (or datasets) entry is required")

    bounds = raw.get("input_bounds")
    if bounds is not None:
        try:
            bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        except (TypeError, ValueError):
            raise ConfigError("input_bounds must be a list of [lower, upper] pairs") from None

    cfg = ExperimentConfig(
        dataset_paths=tuple(str(p) for p in paths),
        input_bounds=bounds,
        basis=_build(BasisConfig, raw.get("basis", {}), "basis") or BasisConfig(),
        prior=_build(PriorConfig, raw.get("prior", {}), "prior") or PriorConfig(),
        noise_variance=float(raw.get("noise_variance", 1.0)),
        split=_build(SplitConfig, raw.get("split", {"train_fraction": 0.7}), "split"),
        conditioning=_build(ConditioningConfig, raw.get("conditioning"), "conditioning"),
        mcmc=_build(McmcConfig, raw.get("mcmc", {}), "mcmc") or McmcConfig(),
        predict_inputs_path=raw.get("predict_inputs_path"),
        oracle_coefficients_path=raw.get("oracle_coefficients_path"),
        oracle_samples=int(raw.get("oracle_samples", 1_000_000)),
        compare_zero_prior=bool(raw.get("compare_zero_prior", True)),
        compare_unconditioned=bool(raw.get("compare_unconditioned", True)),
    )
    if base is not None:
        cfg = cfg.resolve_paths(base)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON experiment configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = config_from_dict(raw, base=path.parent)
    for p in cfg.dataset_paths:
        if not Path(p).exists():
            raise ConfigError(f"referenced dataset does not exist: {p}")
    for attr in ("predict_inputs_path", "oracle_coefficients_path"):
        p = getattr(cfg, attr)
        if p and not Path(p).exists():
            raise ConfigError(f"referenced file does not exist: {p}")
    if cfg.prior.coefficients_path and not Path(cfg.prior.coefficients_path).exists():
        raise ConfigError(
            f"referenced coefficients file does not exist: {cfg.prior.coefficients_path}"
        )
    return cfg
