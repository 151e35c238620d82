"""Exception hierarchy shared across the package.

Every error raised by the library derives from ScreenloopError so callers
can catch one base class at CLI/service boundaries.
"""


class ScreenloopError(Exception):
    """Base class for all library errors."""


# --- ingestion -----------------------------------------------------------

class MalformedRis(ScreenloopError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyDataset(ScreenloopError):
    pass


class BadHeader(ScreenloopError):
    pass


class CsvSyntax(ScreenloopError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NotUtf8(ScreenloopError):
    pass


class AmbiguousLabels(ScreenloopError):
    pass


class BadLabelValue(ScreenloopError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EmptyQuery(ScreenloopError):
    pass


class UnsupportedFormat(ScreenloopError):
    pass


# --- features ------------------------------------------------------------

class EmptyVocabulary(ScreenloopError):
    pass


# --- classifiers ---------------------------------------------------------

class SingleClassTraining(ScreenloopError):
    pass


class NonFiniteLoss(ScreenloopError):
    pass


class DimensionMismatch(ScreenloopError):
    pass


# --- strategies ----------------------------------------------------------

class MissingClass(ScreenloopError):
    pass


class PoolExhausted(ScreenloopError):
    pass


# --- engine --------------------------------------------------------------

class Stopped(ScreenloopError):
    pass


class NoPriorIncluded(ScreenloopError):
    pass


class NoPriorExcluded(ScreenloopError):
    pass


class OverlappingPriors(ScreenloopError):
    pass


class UnknownRowId(ScreenloopError):
    pass


class AlreadyLabeled(ScreenloopError):
    pass


class FingerprintMismatch(ScreenloopError):
    pass


class CorruptState(ScreenloopError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class VersionUnsupported(ScreenloopError):
    pass


class InvalidSettings(ScreenloopError):
    pass


# --- simulation ----------------------------------------------------------

class NotFullyLabeled(ScreenloopError):
    pass


class TooFewOfClass(ScreenloopError):
    pass


class LevelNeverReached(ScreenloopError):
    pass
