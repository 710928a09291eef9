"""
Presets
===================

Named distribution pairs and experiment parameter sets.
Random ingredients (means, covariances) are drawn from a fixed internal
seed so that a preset name always denotes the same pair of distributions.
"""

from typing import Any, Callable, Dict, Tuple

from stream_ot.core.sampling import DistributionSpec, RngState, random_covariance
from stream_ot.errors import ConfigurationError

PRESET_SEED = 20231


# ----------------------------------------
#  DISTRIBUTION PAIRS
# ----------------------------------------
def _gauss1d() -> Tuple[DistributionSpec, DistributionSpec]:
    # variances, not standard deviations
    alpha = DistributionSpec.gaussian([3.0], [[4.0]], name="N(3,4)")
    beta = DistributionSpec.gaussian([1.0], [[2.0]], name="N(1,2)")
    return alpha, beta


def _gaussian_pair(d: int) -> Tuple[DistributionSpec, DistributionSpec]:
    rng = RngState(PRESET_SEED + d)
    mean_a = rng.generator.uniform(0.0, 10.0, size=d)
    mean_b = rng.generator.uniform(0.0, 5.0, size=d)
    alpha = DistributionSpec.gaussian(mean_a, random_covariance(d, 1.0, rng), name=f"gauss{d}d-alpha")
    beta = DistributionSpec.gaussian(mean_b, random_covariance(d, 1.0, rng), name=f"gauss{d}d-beta")
    return alpha, beta


def _mixture(d: int, mean_std: float, scales: Tuple[float, float], rng: RngState,
             name: str) -> DistributionSpec:
    mu = rng.generator.normal(0.0, mean_std, size=d)
    covs = [random_covariance(d, c, rng) for c in scales]
    return DistributionSpec.mixture([mu, -mu], covs, name=name)


def _gmm_pair(d: int, scales: Tuple[float, float]) -> Tuple[DistributionSpec, DistributionSpec]:
    rng = RngState(PRESET_SEED + 100 + d)
    alpha = _mixture(d, 10.0, scales, rng, f"gmm{d}d-alpha")
    beta = _mixture(d, 5.0, scales, rng, f"gmm{d}d-beta")
    return alpha, beta


DISTRIBUTION_PRESETS: Dict[str, Callable[[], Tuple[DistributionSpec, DistributionSpec]]] = {
    "gauss1d_paper": _gauss1d,
    "gauss2d_paper": lambda: _gaussian_pair(2),
    "gauss5d_paper": lambda: _gaussian_pair(5),
    "gmm2d_paper": lambda: _gmm_pair(2, (3.0, 4.0)),
    "gmm5d_paper": lambda: _gmm_pair(5, (1.0, 0.4)),
}


def get_distribution_pair(name: str) -> Tuple[DistributionSpec, DistributionSpec]:
    """
    Build the (alpha, beta) pair for a preset name.

    Args:
        name: One of DISTRIBUTION_PRESETS

    Returns:
        Tuple (alpha, beta)
    """
    try:
        builder = DISTRIBUTION_PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(DISTRIBUTION_PRESETS))
        raise ConfigurationError(f"unknown distribution preset '{name}' (known: {known})")
    return builder()


# ----------------------------------------
#  EXPERIMENTS
# ----------------------------------------
EXPERIMENT_PRESETS: Dict[str, Dict[str, Any]] = {
    "os_rate_1d": {
        "distribution": "gauss1d_paper", "epsilon": 0.3, "a": 1.2, "b": -0.6,
        "algo": "os", "compress": "none", "n_max": 30000,
    },
    "os_rate_2d": {
        "distribution": "gauss2d_paper", "epsilon": 0.3, "a": 1.7, "b": -0.6,
        "algo": "os", "compress": "none", "n_max": 30000,
    },
    "os_rate_5d": {
        "distribution": "gauss5d_paper", "epsilon": 0.4, "a": 1.5, "b": -0.55,
        "algo": "os", "compress": "none", "n_max": 30000,
    },
    "cos_fourier_1d": {
        "distribution": "gauss1d_paper", "epsilon": 0.4, "a": 1.5, "b": -0.6, "zeta": 0.95,
        "algo": "cos", "compress": "fourier", "n_max": 20000,
    },
    "cos_gq_1d": {
        "distribution": "gauss1d_paper", "epsilon": 0.4, "a": 1.5, "b": -0.6, "zeta": 2.0,
        "algo": "cos", "compress": "gq", "n_max": 20000,
    },
    "cos_fourier_gmm2d": {
        "distribution": "gmm2d_paper", "epsilon": 0.5, "a": 1.2, "b": -0.6, "zeta": 0.9,
        "algo": "cos", "compress": "fourier", "n_max": 5000,
    },
    "cos_fourier_gmm5d": {
        "distribution": "gmm5d_paper", "epsilon": 0.5, "a": 1.2, "b": -0.6, "zeta": 0.9,
        "algo": "cos", "compress": "fourier", "n_max": 5000,
    },
}


def get_experiment(name: str) -> Dict[str, Any]:
    """Copy of a named experiment parameter set."""
    if name not in EXPERIMENT_PRESETS:
        known = ", ".join(sorted(EXPERIMENT_PRESETS))
        raise ConfigurationError(f"unknown experiment '{name}' (known: {known})")
    return dict(EXPERIMENT_PRESETS[name])
