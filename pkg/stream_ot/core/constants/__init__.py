"""
Constants
======================

Provides access to the named distribution and experiment presets.
"""

from stream_ot.core.constants.presets import (
    DISTRIBUTION_PRESETS,
    EXPERIMENT_PRESETS,
    get_distribution_pair,
    get_experiment,
)

# Export the constants and functions
__all__ = [
    'DISTRIBUTION_PRESETS',
    'EXPERIMENT_PRESETS',
    'get_distribution_pair',
    'get_experiment',
]
