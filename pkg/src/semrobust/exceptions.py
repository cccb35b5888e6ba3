"""
Custom exception classes for semantic robustness assessment.

This module defines application-specific exceptions to provide better
error handling and more informative error messages throughout the system.
"""


class SemRobustError(Exception):
    """Base exception class for all semrobust application errors.

    This serves as the root exception class that all other application-specific
    exceptions inherit from, allowing for easy catching of all application errors.
    """

    def __init__(self, message, details=None):
        """Initialize semrobust base error.

        Args:
            message: Human-readable error message
            details: Optional dictionary containing additional error details
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self):
        """Return string representation of the error."""
        if self.details:
            return f"{self.message} (Details: {self.details})"
        return self.message


class ConfigurationError(SemRobustError):
    """Exception raised when configuration is invalid or missing.

    This exception is raised when the experiment configuration is invalid,
    missing required settings, or contains out-of-range values.
    """

    def __init__(self, message, config_key=None, config_value=None):
        """Initialize configuration error.

        Args:
            message: Human-readable error message
            config_key: Configuration key that caused the error
            config_value: Invalid configuration value
        """
        details = {}
        if config_key:
            details["config_key"] = config_key
        if config_value is not None:
            details["config_value"] = config_value

        super().__init__(message, details)
        self.config_key = config_key
        self.config_value = config_value


class ValidationError(SemRobustError):
    """Exception raised when a domain value fails validation.

    Raised at type boundaries when vectors, budgets or statistic arguments
    violate the invariants of the receiving operation.
    """

    def __init__(
        self,
        message,
        field_name=None,
        field_value=None,
        validation_rule=None,
    ):
        """Initialize validation error.

        Args:
            message: Human-readable error message
            field_name: Name of the field that failed validation
            field_value: Value that failed validation
            validation_rule: Description of the validation rule that was violated
        """
        details = {}
        if field_name:
            details["field_name"] = field_name
        if field_value is not None:
            details["field_value"] = field_value
        if validation_rule:
            details["validation_rule"] = validation_rule

        super().__init__(message, details)
        self.field_name = field_name
        self.field_value = field_value
        self.validation_rule = validation_rule


class InvalidBudgetError(ValidationError):
    """Raised for non-positive or non-finite per-attribute budgets or scales."""


class ShapeError(ValidationError):
    """Raised when array dimensions disagree or entries are not finite."""


class DegenerateInputError(ValidationError):
    """Raised when an input has no usable direction (zero perturbation, zero normal)."""


class InsufficientDataError(ValidationError):
    """Raised when a statistic is undefined for the amount of data supplied."""


class DomainError(ValidationError):
    """Raised when a statistical function is called outside its domain."""


class NumericalError(SemRobustError):
    """Exception raised when a numerical routine fails.

    A failure here on finite inputs signals a bug rather than bad data, so the
    diagnostics needed to reproduce it are kept on the exception.
    """

    def __init__(self, message, operation=None, diagnostics=None):
        """Initialize numerical error.

        Args:
            message: Human-readable error message
            operation: Name of the routine that failed
            diagnostics: Dictionary of values describing the failing state
        """
        details = {}
        if operation:
            details["operation"] = operation
        if diagnostics:
            details.update(diagnostics)

        super().__init__(message, details)
        self.operation = operation
        self.diagnostics = diagnostics or {}


class OutputError(SemRobustError):
    """Exception raised when reading or writing an artifact fails."""

    def __init__(self, message, path=None, os_error=None):
        """Initialize output error.

        Args:
            message: Human-readable error message
            path: File path involved in the failure
            os_error: Original OS-level exception if available
        """
        details = {}
        if path:
            details["path"] = str(path)
        if os_error:
            details["os_error"] = str(os_error)
            details["os_error_type"] = type(os_error).__name__

        super().__init__(message, details)
        self.path = path
        self.os_error = os_error
