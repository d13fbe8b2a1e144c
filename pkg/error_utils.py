"""
Error Utilities Module
Exception hierarchy and safe error logging shared by every module
"""
import os
import traceback


class SurrogateLabError(Exception):
    """Base class for every error raised by Surrogate Lab"""
    pass


class ConfigError(SurrogateLabError):
    """Raised when a configuration value or key is invalid"""
    pass


class DataFormatError(SurrogateLabError):
    """Raised when a CSV, model or metadata file cannot be parsed"""
    pass


class DimensionError(SurrogateLabError):
    """Raised when feature dimensions disagree or are unsupported"""
    pass


class NoCounterfactualError(SurrogateLabError):
    """Raised when Growing Spheres finds no enemy within max_radius"""
    pass


class SingularSystemError(SurrogateLabError):
    """Raised when a least-squares system cannot be solved"""
    pass


class EnumerationCapError(SurrogateLabError):
    """Raised when full coalition enumeration exceeds the configured cap"""
    pass


class TrainingDivergedError(SurrogateLabError):
    """Raised when the training loss becomes non-finite"""
    pass


class EstimationError(SurrogateLabError):
    """Raised when an estimator's preconditions are not met (LID, PCA, k-means)"""
    pass


def debug_enabled() -> bool:
    """Whether full tracebacks should be printed (SURROGATE_LAB_DEBUG=true)"""
    return os.environ.get('SURROGATE_LAB_DEBUG', 'False').lower() == 'true'


def safe_log_error(error: Exception, context: str = "", debug: bool = None):
    """
    Log an error as a single line, with the traceback only in debug mode.

    Args:
        error: The exception that occurred
        context: Optional context string describing where the error occurred
        debug: Whether to show full traceback (defaults to SURROGATE_LAB_DEBUG env var)

    Returns:
        None
    """
    if debug is None:
        debug = debug_enabled()

    context_msg = f" in {context}" if context else ""
    print(f"⚠️  Error{context_msg}: {error}")
    if debug:
        traceback.print_exc()
