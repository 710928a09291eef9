"""
Measure compression under moment constraints.
"""

from stream_ot.core.compression.cells import fourier_compress_potential
from stream_ot.core.compression.fourier import FrequencySet, fourier_compress, fourier_moment_system
from stream_ot.core.compression.measures import (
    CompressionResult,
    WeightedMeasure,
    compression_error_probe,
    measure_to_potential,
    potential_to_measure,
)
from stream_ot.core.compression.nnls import NNLSResult, nnls
from stream_ot.core.compression.quadrature import gq_compress

__all__ = [
    "CompressionResult",
    "FrequencySet",
    "NNLSResult",
    "WeightedMeasure",
    "compression_error_probe",
    "fourier_compress",
    "fourier_compress_potential",
    "fourier_moment_system",
    "gq_compress",
    "measure_to_potential",
    "nnls",
    "potential_to_measure",
]
