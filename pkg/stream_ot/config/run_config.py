"""
Run Configuration
=================

RunConfig and its parser. A run is described by a flat JSON document whose
keys are mirrored one-to-one by command-line flags.

Precedence, highest first:
    command-line flag > JSON file value > named experiment preset >
    STREAM_OT_SEED (seed only) > built-in default
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from stream_ot.config import settings
from stream_ot.core.compressed_online import COMPRESSION_METHODS, CompressionConfig
from stream_ot.core.constants.presets import get_distribution_pair, get_experiment
from stream_ot.core.online_sinkhorn import Schedule
from stream_ot.core.sampling import DistributionSpec
from stream_ot.errors import ConfigurationError

ALGORITHMS = ("os", "cos")

# keys where setting one clears the other
_BUDGET_KEYS = ("n_max", "iterations")


@dataclass(frozen=True)
class RunConfig:
    """
    Attributes:
        distribution: Preset name, or {"alpha": {...}, "beta": {...}} inline Gaussian specs
        epsilon: Entropic regularisation
        a: Batch growth exponent
        b: Learning-rate exponent
        zeta: Compression regularity
        algo: "os" or "cos"
        compress: "none", "fourier" or "gq"
        trigger: Sample count after which compression starts
        every: Compression cadence in iterations
        n_max: Sample budget per side (exclusive with iterations)
        iterations: Iteration count (exclusive with n_max)
        seed: Random seed
        output: Trace CSV path; derived from the other keys when empty
        experiment: Name of the preset the values came from, if any
        reference_n: Samples per side of the discrete reference value; 0 disables it
        compare: Also run the uncompressed algorithm on the same seed
    """

    distribution: Union[str, Dict[str, Any]] = "gauss1d_paper"
    epsilon: float = 0.3
    a: float = 1.2
    b: float = -0.6
    zeta: float = 1.0
    algo: str = "os"
    compress: str = "none"
    trigger: int = settings.TRIGGER_N
    every: int = 1
    n_max: Optional[int] = 10000
    iterations: Optional[int] = None
    seed: int = 0
    output: Optional[str] = None
    experiment: Optional[str] = None
    reference_n: int = 0
    compare: bool = False

    @property
    def label(self) -> str:
        if self.experiment:
            return self.experiment
        return self.distribution if isinstance(self.distribution, str) else "inline"

    def schedule(self) -> Schedule:
        return Schedule(a=self.a, b=self.b, epsilon=self.epsilon, zeta=self.zeta)

    def compression(self, dimension: Optional[int] = None) -> CompressionConfig:
        return CompressionConfig(method=self.compress, zeta=self.zeta, trigger_N=self.trigger,
                                 every=self.every, dimension=dimension)

    def distributions(self) -> Tuple[DistributionSpec, DistributionSpec]:
        if isinstance(self.distribution, str):
            return get_distribution_pair(self.distribution)
        return _inline_spec(self.distribution, "alpha"), _inline_spec(self.distribution, "beta")

    def trace_path(self) -> str:
        if self.output:
            return self.output
        name = f"{self.label}_{self.algo}_{self.compress}_seed{self.seed}.csv"
        return os.path.join(settings.OUTPUT_DIR, name)


_FIELD_NAMES = tuple(f.name for f in fields(RunConfig))
_INT_KEYS = ("trigger", "every", "n_max", "iterations", "seed", "reference_n")
_FLOAT_KEYS = ("epsilon", "a", "b", "zeta")


def _inline_spec(block: Mapping[str, Any], side: str) -> DistributionSpec:
    try:
        spec = block[side]
    except (KeyError, TypeError):
        raise ConfigurationError(f"inline distribution is missing the '{side}' block")
    if "means" in spec:
        return DistributionSpec.mixture(spec["means"], spec["covariances"], spec.get("weights"), name=side)
    if "mean" in spec:
        return DistributionSpec.gaussian(spec["mean"], spec["covariance"], name=side)
    raise ConfigurationError(f"inline '{side}' needs 'mean'/'covariance' or 'means'/'covariances'")


def _read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as e:
        raise ConfigurationError(f"cannot read config file: {e.strerror} (path: {path})")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file is not valid JSON: {e.msg} at line {e.lineno} (path: {path})")
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file must hold a single JSON object (path: {path})")
    return data


def _merge(values: Dict[str, Any], layer: Mapping[str, Any], source: str):
    for key, value in layer.items():
        if value is None:
            continue
        if key not in _FIELD_NAMES:
            raise ConfigurationError(f"unknown config key '{key}' in {source}")
        if key in _BUDGET_KEYS:
            for other in _BUDGET_KEYS:
                values[other] = None
        values[key] = value


def _coerce(values: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(values)
    try:
        for key in _FLOAT_KEYS:
            out[key] = float(out[key])
        for key in _INT_KEYS:
            if out[key] is not None:
                if isinstance(out[key], float) and not out[key].is_integer():
                    raise ConfigurationError(f"'{key}' must be an integer, got {out[key]}")
                out[key] = int(out[key])
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid numeric config value: {e}")
    out["compare"] = bool(out["compare"])
    return out


def validate_config(cfg: RunConfig) -> RunConfig:
    """
    Check a RunConfig as a whole; schedule violations surface as ScheduleError.

    Returns:
        The same config
    """
    cfg.schedule()
    if cfg.algo not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm '{cfg.algo}' (known: {', '.join(ALGORITHMS)})")
    if cfg.compress not in COMPRESSION_METHODS:
        raise ConfigurationError(
            f"unknown compression method '{cfg.compress}' (known: {', '.join(COMPRESSION_METHODS)})"
        )
    if cfg.algo == "os" and cfg.compress != "none":
        raise ConfigurationError(f"algorithm 'os' does not compress; use algo 'cos' for '{cfg.compress}'")
    if cfg.compare and cfg.compress == "none":
        raise ConfigurationError("comparing runs needs a compression method")
    if (cfg.n_max is None) == (cfg.iterations is None):
        raise ConfigurationError("give exactly one of n_max or iterations")
    if cfg.reference_n and cfg.reference_n < 256:
        raise ConfigurationError(f"reference_n must be 0 or at least 256, got {cfg.reference_n}")
    alpha, beta = cfg.distributions()
    if alpha.dimension != beta.dimension:
        raise ConfigurationError(f"alpha is {alpha.dimension}-dimensional, beta {beta.dimension}-dimensional")
    cfg.compression(alpha.dimension)
    return cfg


def parse_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from a JSON file and flag overrides.

    Args:
        path: Optional flat JSON config file
        overrides: Values from the command line; None entries are ignored

    Returns:
        Validated RunConfig
    """
    overrides = dict(overrides or {})
    file_values = _read_json(path) if path else {}

    values = asdict(RunConfig())
    values["seed"] = settings.seed_fallback()

    experiment = overrides.get("experiment") or file_values.get("experiment")
    if experiment:
        _merge(values, get_experiment(experiment), f"experiment '{experiment}'")
        values["experiment"] = experiment
    _merge(values, file_values, path or "config file")
    _merge(values, overrides, "command-line flags")

    cfg = validate_config(RunConfig(**_coerce(values)))
    logging.debug(f"Effective config: {dump_config(cfg)}")
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Effective config as a JSON document that parse_config reads back unchanged."""
    return json.dumps(asdict(cfg), sort_keys=True)
