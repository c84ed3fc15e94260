"""Exception hierarchy.

Every error carries a ``category`` used by the CLI to choose an exit code:
``usage`` -> 2, ``data`` -> 3, ``training`` -> 4.
"""


class ColorTrajError(Exception):
    category = "data"


class UsageError(ColorTrajError):
    category = "usage"


class InvalidConfig(UsageError):
    pass


# colorspace
class EmptyMask(ColorTrajError):
    pass


class NonMonotonicTime(ColorTrajError):
    pass


# signal
class EmptySignal(ColorTrajError):
    pass


# basis
class OutOfDomain(ColorTrajError):
    pass


class RankDeficient(ColorTrajError):
    pass


class IllConditionedWarning(UserWarning):
    pass


# dataset
class InvalidSelection(ColorTrajError):
    pass


class EmptySimilarSet(ColorTrajError):
    pass


class ParseError(ColorTrajError):
    def __init__(self, message, path=None, line=None, field=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        super().__init__(f"{': '.join(loc)}: {message}" if loc else message)
        self.path = path
        self.line = line
        self.field = field


class SchemaMismatch(ColorTrajError):
    pass


# net
class NotNormalized(ColorTrajError):
    pass


class BadImageSize(ColorTrajError):
    pass


class ModalityMismatch(ColorTrajError):
    pass


class EmptyTrainingSet(ColorTrajError):
    category = "training"


class TrainingDiverged(ColorTrajError):
    category = "training"


class BadWindow(ColorTrajError):
    pass


class TrajectoryTooShort(ColorTrajError):
    category = "training"


# eval
class LengthMismatch(ColorTrajError):
    pass


class EmptyInput(ColorTrajError):
    pass


class EmptyEvalSet(ColorTrajError):
    pass


class NonPositiveReference(ColorTrajError):
    pass
