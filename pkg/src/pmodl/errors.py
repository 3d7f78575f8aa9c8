"""Exception types shared across the package."""


class MapParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class PlanningError(RuntimeError):
    """No collision-free path exists between the requested cells."""


class EpisodeSamplingError(RuntimeError):
    """The environment could not produce a valid episode."""


class UsageError(RuntimeError):
    """An API was called in a state that does not allow it."""


class TrainingError(FloatingPointError):
    """A loss or gradient became non-finite."""


class ExportError(RuntimeError):
    pass


class DataError(ValueError):
    """Recorded data violates a metric's precondition."""
