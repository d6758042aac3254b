"""Exception taxonomy shared across the toolkit.

Everything raised on purpose derives from TimFlowError so callers can catch
library failures without swallowing programming errors.
"""


class TimFlowError(Exception):
    """Base class for all timflow errors."""


# --- pattern / rasterization ---------------------------------------------

class InvalidPattern(TimFlowError):
    """A dispense pattern violates its invariants or schema."""


class OutOfBounds(TimFlowError):
    """A segment's unit-width rectangle leaves the grid."""


class NonPositiveGap(TimFlowError):
    """Gap height must be a positive finite number."""


class TargetTooSmall(TimFlowError):
    """Requested segment count is below the pattern's current count."""


# --- compression heuristic -------------------------------------------------

class NonFiniteInput(TimFlowError):
    """Compression input contains NaN or infinity."""


class MassOverflow(TimFlowError):
    """Material would spread beyond the grid under the error-on-overflow policy."""


class NonConvergence(TimFlowError):
    """Relaxation did not settle within the sweep cap; input is pathological."""


# --- surrogate network -------------------------------------------------------

class ShapeMismatch(TimFlowError):
    """Grid or tensor shapes are incompatible."""


class EmptyDataset(TimFlowError):
    """Training requires at least one sample."""


class DivergedLoss(TimFlowError):
    """Training loss became non-finite."""


# --- dataset generation and files -------------------------------------------

class GenerationStalled(TimFlowError):
    """Rejection sampling failed to produce a record."""


class IoError(TimFlowError):
    """Reading or writing a dataset/weights file failed at the OS level."""


class FormatError(TimFlowError):
    """A binary file has a bad magic, version, or is truncated."""


# --- metrics and benchmarking -------------------------------------------------

class ZeroReference(TimFlowError):
    """Relative error is undefined for an all-zero reference grid."""


class EmptyList(TimFlowError):
    """At least one element is required."""


class EmptyRegion(TimFlowError):
    """Coverage region mask selects no cells."""


class BenchmarkAborted(TimFlowError):
    """The timed subject raised; carries the failing pattern index."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index
