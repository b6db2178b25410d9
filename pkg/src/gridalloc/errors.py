"""Exception hierarchy shared by the engine and the CLI."""


class InputError(ValueError):
    """Malformed or invariant-violating input."""


class DegenerateStageError(InputError):
    """A stage with no satellite/grid visibility where one is required."""


class CapacityError(RuntimeError):
    """An enumeration or exhaustive search would exceed its configured cap."""
