"""Exception types shared across the package."""


class MarketGameError(ValueError):
    """Base class for all invalid-input and configuration errors."""


class InvalidProfileError(MarketGameError):
    """A strategy profile does not fit the game (wrong length or model index)."""


class InvalidParameterError(MarketGameError):
    """A numeric parameter is outside its documented range."""


class InvalidInstanceError(MarketGameError):
    """A game instance violates a precondition of the requested analysis."""


class BudgetExceededError(MarketGameError):
    """An exhaustive computation would exceed its configured budget."""

    def __init__(self, message: str, required: int, budget: int):
        super().__init__(message)
        self.required = required
        self.budget = budget


class ConfigError(MarketGameError):
    """A run configuration is malformed."""


class TrainingDivergedError(MarketGameError):
    """An entry-training loop produced a non-finite loss."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace
