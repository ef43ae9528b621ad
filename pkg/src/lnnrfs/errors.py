class ContractError(ValueError):
    """Caller passed arguments that violate an operation's preconditions."""


class ConfigError(ValueError):
    """Invalid or unknown configuration entries."""


class NumericalInstabilityError(ArithmeticError):
    pass


class CorruptModelError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; ``model`` and ``history`` hold the last good epoch."""

    def __init__(self, message, model, history):
        super().__init__(message)
        self.model = model
        self.history = history


class FilterError(RuntimeError):
    pass
