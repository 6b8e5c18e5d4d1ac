"""Error types raised by the laboratory.

Everything derives from ``ValueError`` so callers that only care about bad input can keep
catching that, while the CLI can map config problems and contract failures to exit codes.
"""

from typing import Any, Dict, Optional


class LabError(ValueError):
    """Base class for anisolab errors."""


class BandRangeError(LabError):
    """A dyadic band index lies outside the guarded range."""


class SpecMismatchError(LabError):
    """Two operands live on different lattices."""


class ParameterRangeError(LabError):
    """Smoothness or integrability parameters outside the admissible range."""


class SupportError(LabError):
    """A function expected to be supported in K leaks outside the support ball."""


class BandLimitError(LabError):
    """A function expected to be band-limited carries out-of-band energy."""


class LeafValidationError(LabError):
    """A candidate leaf violates the chart bound or the chord condition."""


class ConfigError(LabError):
    """The experiment configuration is malformed."""


class ContractViolation(LabError):
    """A numerical contract did not hold.

    The message stays human-readable; the CLI summary travels on ``response``.
    """

    def __init__(self, message: str, response: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.response = response or {}
