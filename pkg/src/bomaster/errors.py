class NumericalError(ArithmeticError):
    """A linear-algebra or scoring step produced an unusable result."""


class DataError(ValueError):
    """Training data is malformed (non-finite targets, wrong shapes)."""


class ConfigError(ValueError):
    """An experiment configuration refers to something that does not exist."""
