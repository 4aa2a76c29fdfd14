"""Exception hierarchy for krige.

Every error carries a stable ``code`` and optional context keys so the CLI can
render it as a one-line JSON record. User errors map to exit 2, numerical
errors to exit 3.
"""

from __future__ import annotations

from typing import Any


class KrigeError(Exception):
    code = "krige_error"
    exit_code = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> dict:
        payload = {"error": self.code, "message": self.message}
        payload.update(self.context)
        return payload


# ---------------------------------------------------------------------------
# User / configuration errors (exit 2)
# ---------------------------------------------------------------------------

class UserInputError(KrigeError, ValueError):
    code = "user_input"
    exit_code = 2


class ConfigError(UserInputError):
    """A flag or config key violates its constraint."""

    code = "config"

    def __init__(self, message: str, flag: str | None = None, **context: Any):
        if flag is not None:
            context["flag"] = flag
        super().__init__(message, **context)
        self.flag = flag


class DimensionMismatchError(UserInputError):
    code = "dimension_mismatch"

    def __init__(self, left: int, right: int, what: str = "locations"):
        super().__init__(
            f"Dimension mismatch between {what}: {left} vs {right}",
            left_dimension=left,
            right_dimension=right,
        )


class DataFileError(UserInputError):
    code = "data_file"

    def __init__(self, message: str, path: str, line: int | None = None):
        context: dict[str, Any] = {"path": path}
        if line is not None:
            context["line"] = line
        super().__init__(message, **context)
        self.line = line


class InsufficientDataError(UserInputError):
    code = "insufficient_data"


class BudgetExceededError(UserInputError):
    code = "budget_exceeded"


# ---------------------------------------------------------------------------
# Numerical errors (exit 3)
# ---------------------------------------------------------------------------

class NumericalError(KrigeError):
    code = "numerical"
    exit_code = 3


class SingularSystemError(NumericalError):
    code = "singular_system"


class NotPositiveDefiniteError(NumericalError):
    code = "not_positive_definite"


class InternalConsistencyError(NumericalError):
    code = "internal_consistency"


class ContractViolationError(NumericalError):
    code = "contract_violation"
