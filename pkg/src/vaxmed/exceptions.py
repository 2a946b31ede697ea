class VaxmedError(Exception):
    """Base class for errors raised by this package."""


class InputError(VaxmedError, ValueError):
    """Malformed arguments: unknown nodes, out-of-support values, bad probabilities."""


class GraphError(InputError):
    pass


class CapacityError(VaxmedError):
    """Exact enumeration would exceed the configured number of noise configurations."""


class EstimationError(VaxmedError):
    """No stratum of the data supports the requested contrast."""


class ScenarioError(InputError):
    """A scenario failed validation; ``errors`` holds ``(location, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{loc}: {msg}" for loc, msg in self.errors))
