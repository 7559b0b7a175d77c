"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: DatasetError -> 2,
LLMServiceError -> 3, NumericError -> 4.
"""


class NoiseForgeError(Exception):
    """Base class for all toolkit errors."""


class DatasetError(NoiseForgeError):
    """Bad or missing input data (files, manifests, label ranges)."""


class NumericError(NoiseForgeError):
    """Numerical failure: divergence, non-convergence, degenerate input."""


class ConvergenceError(NumericError):
    """An iterative solver failed to reach its tolerance."""


class DegenerateInputError(NumericError):
    """Input admits no meaningful answer (e.g. all values identical)."""


class LLMServiceError(NoiseForgeError):
    """Unrecoverable failure talking to the annotation endpoint."""


class LLMAuthError(LLMServiceError):
    """Authentication rejected; aborts the whole run."""
