"""Exception types shared across the package."""


class SuprecError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(SuprecError, ValueError):
    """A problem configuration violates its invariants."""


class InvalidInputError(SuprecError, ValueError):
    """An operation received malformed or inconsistent data."""


class DegenerateInputError(SuprecError, ValueError):
    """A matrix that must be positive definite is (numerically) singular."""


class BudgetExceededError(SuprecError, RuntimeError):
    """A sweep's estimated cost exceeds the configured operation budget."""

    def __init__(self, estimated_ops: float, budget: float):
        self.estimated_ops = estimated_ops
        self.budget = budget
        super().__init__(
            f"sweep needs ~{estimated_ops:.3g} multiply-adds, budget is {budget:.3g}"
        )
