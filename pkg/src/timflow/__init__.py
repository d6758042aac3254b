"""timflow: thermal interface material spreading, simulated and learned.

Predicts how a dispensed paste pattern spreads when a heatsink is pressed
down to a uniform gap: a relaxation heuristic produces the compressed state,
a convolutional surrogate trained on heuristic outputs produces it faster,
and benchmark, service, and CLI layers wrap both for design work.
"""

__version__ = "0.1.0"

from . import errors
from .heuristic import (CompressionConfig, CompressionResult, CropAndReport,
                        ErrorOnOverflow, LinearSteps, Multiplicative, SingleStep,
                        compress, inner_relax)
from .pattern import (DispensePattern, GridSpec, TimGrid, discretize, pad_pattern,
                      scale_for_gap, segment_cell_overlap)

__all__ = [
    "CompressionConfig", "CompressionResult", "CropAndReport", "DispensePattern",
    "ErrorOnOverflow", "GridSpec", "LinearSteps", "Multiplicative", "SingleStep",
    "TimGrid", "compress", "discretize", "errors", "inner_relax", "pad_pattern",
    "scale_for_gap", "segment_cell_overlap", "__version__",
]
