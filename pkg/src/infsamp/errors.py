"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with inputs that break its preconditions."""


class DivergenceError(RuntimeError):
    """An iterative procedure produced non-finite or exploding values."""


class SingularHessianError(RuntimeError):
    """The damped Hessian could not be inverted; increase damping."""


class SchemaError(ValueError):
    """A dataset file violates the JSONL schema.

    The message names the offending line number and field.
    """


class ConfigError(ValueError):
    """A config document is missing required keys or holds invalid values."""
