"""Exception hierarchy shared by all pbn modules."""


class PBNError(Exception):
    """Base class for every error raised by pbn."""


# space construction / indexing
class NegativeWeight(PBNError):
    pass


class NotNormalized(PBNError):
    pass


class DuplicateLabel(PBNError):
    pass


class IndexOutOfRange(PBNError):
    pass


class SpaceMismatch(PBNError):
    pass


class SizeOverflow(PBNError):
    pass


class InvalidPartition(PBNError):
    pass


class InvalidFiltration(PBNError):
    pass


# conditioning
class ZeroProbabilityCondition(PBNError):
    pass


class ZeroProbabilityAtom(ZeroProbabilityCondition):
    pass


# dims
class UndeclaredAxis(PBNError):
    pass


class DimensionMismatch(PBNError):
    pass


# chains and discrete martingales
class InvalidChain(PBNError):
    pass


class NotAnEigenpair(PBNError):
    pass


class ZeroVector(PBNError):
    pass


class ZeroLambda(PBNError):
    pass


class NonZeroMeanIncrement(PBNError):
    pass


class TreeTooLarge(PBNError):
    pass


class BoundExceeded(PBNError):
    pass


# continuous-time simulation
class BadRate(PBNError):
    pass


class BadVolatility(PBNError):
    pass


class UnknownMeanFunction(PBNError):
    pass


class NotCompensatedBrownian(PBNError):
    pass


class TimesNotOnGrid(PBNError):
    pass


class TooFewPaths(PBNError):
    pass


class InvalidGrid(PBNError):
    pass


# language / model loading
class UnboundName(PBNError):
    pass


class TypeMismatch(PBNError):
    pass


class IoError(PBNError):
    """A model file could not be read."""


class SchemaError(PBNError):
    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class PBNSyntaxError(PBNError):
    """Parse failure with a 0-based offset, 1-based line/column and the expected tokens."""

    def __init__(self, message, text, pos, expected=()):
        self.text = text
        self.pos = max(0, min(pos, len(text)))
        self.expected = tuple(sorted(set(expected)))
        before = text[: self.pos]
        self.line = before.count("\n") + 1
        self.column = self.pos - (before.rfind("\n") + 1) + 1
        detail = message
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(f"line {self.line}, column {self.column}: {detail}")
        self.detail = detail

    def caret(self):
        lines = self.text.split("\n")
        src = lines[self.line - 1] if lines else ""
        return f"{src}\n{' ' * (self.column - 1)}^ {self.detail}"
