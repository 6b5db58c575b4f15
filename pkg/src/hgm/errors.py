"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point, shape, or parameter is outside its valid domain."""


class ConfigError(ValueError):
    """An experiment or family configuration is invalid."""


class FormatError(ValueError):
    """A serialized artifact (truth table, config file) is malformed."""


class BudgetError(RuntimeError):
    """An exact enumeration would exceed the configured budget."""
