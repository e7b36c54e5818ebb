"""Exception hierarchy shared across the package."""


class RingPairsError(Exception):
    """Base class for all package errors."""


class ConfigError(RingPairsError, ValueError):
    """Invalid configuration; ``path`` points into the config tree."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class StatisticsError(RingPairsError):
    """A statistical precondition failed (no dip, no accidentals, fit diverged...)."""


class UnsortedStreamError(RingPairsError, ValueError):
    pass


class RangeError(RingPairsError, ValueError):
    pass


class NoDipFoundError(StatisticsError):
    pass


class FitError(StatisticsError):
    pass


class PeakNotFoundError(StatisticsError):
    pass


class ZeroAccidentalsError(StatisticsError):
    def __init__(self, coincidences):
        self.coincidences = coincidences
        super().__init__(f"no accidental counts (peak window holds {coincidences}); CAR undefined")


class AcquisitionTooLarge(RingPairsError, MemoryError):
    pass
