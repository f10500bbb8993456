"""Exception types shared across the package."""


class ContractError(ValueError):
    """A caller violated a documented precondition."""


class DimensionError(ContractError):
    """Array shapes do not line up."""


class BudgetError(ContractError):
    """Problem size exceeds what a solver is willing to attempt."""


class NonFiniteError(FloatingPointError):
    """A NaN or infinity showed up where only finite reals are allowed.

    ``source`` names the computation that produced the bad value (an
    objective name, a parameter vector, ...) so a failing training run can
    say which quantity blew up.
    """

    def __init__(self, message, source=None, payload=None):
        super().__init__(message if source is None else f"{source}: {message}")
        self.message = message
        self.source = source
        self.payload = payload


class ParseError(ValueError):
    """A point-cloud file could not be read."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
