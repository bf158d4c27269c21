"""Exception hierarchy.

Every error carries a short ``code`` so the CLI can emit a machine-parsable
first line before the human-readable message.
"""


class RealogicError(Exception):
    code = "REALOGIC_ERROR"


# tensor
class IncompatibleShapes(RealogicError, ValueError):
    code = "INCOMPATIBLE_SHAPES"


class InvalidAxis(RealogicError, ValueError):
    code = "INVALID_AXIS"


class InvalidExponent(RealogicError, ValueError):
    code = "INVALID_EXPONENT"


class ShapeMismatch(RealogicError, ValueError):
    code = "SHAPE_MISMATCH"


class NonScalarRoot(RealogicError, ValueError):
    code = "NON_SCALAR_ROOT"


# fuzzy
class OutOfRangeTruth(RealogicError, ValueError):
    code = "OUT_OF_RANGE_TRUTH"


class EmptyKnowledgeBase(RealogicError, ValueError):
    code = "EMPTY_KNOWLEDGE_BASE"


# logic
class UnboundSymbol(RealogicError, KeyError):
    code = "UNBOUND_SYMBOL"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ArityMismatch(RealogicError, ValueError):
    code = "ARITY_MISMATCH"


class QuantifyingAbsentVariable(RealogicError, ValueError):
    code = "QUANTIFYING_ABSENT_VARIABLE"


class DuplicateVariableConflict(RealogicError, ValueError):
    code = "DUPLICATE_VARIABLE_CONFLICT"


class EmptyGrounding(RealogicError, ValueError):
    code = "EMPTY_GROUNDING"


# parser
class SyntaxProblem(RealogicError):
    """Base for errors tied to a position in formula text."""

    code = "SYNTAX"

    def __init__(self, message, offset=None, text=None):
        self.message = message
        self.offset = offset
        self.text = text
        super().__init__(self._render())

    def _render(self):
        if self.offset is None:
            return self.message
        if self.text is None:
            return f"{self.message} (offset {self.offset})"
        line = self.text.count("\n", 0, self.offset) + 1
        col = self.offset - (self.text.rfind("\n", 0, self.offset) + 1) + 1
        return f"{self.message} (line {line}, column {col})"


class LexError(SyntaxProblem):
    code = "LEX_ERROR"


class ParseError(SyntaxProblem):
    code = "PARSE_ERROR"


class ArityError(SyntaxProblem):
    code = "ARITY_ERROR"


class UnknownSymbol(SyntaxProblem):
    code = "UNKNOWN_SYMBOL"


class KindError(SyntaxProblem):
    code = "KIND_ERROR"


class SignatureError(RealogicError, ValueError):
    code = "SIGNATURE_ERROR"


# learn
class OpenFormula(RealogicError, ValueError):
    code = "NOT_CLOSED"


class EmptyBatch(RealogicError, ValueError):
    code = "EMPTY_BATCH"


class NonFiniteLoss(RealogicError, FloatingPointError):
    code = "NON_FINITE_LOSS"


# cli / data
class ConfigError(RealogicError, ValueError):
    code = "CONFIG_ERROR"


class DataError(RealogicError, ValueError):
    code = "DATA_ERROR"


class MissingColumn(DataError):
    code = "MISSING_COLUMN"


class NonNumericCell(DataError):
    code = "NON_NUMERIC_CELL"

    def __init__(self, message, row=None, col=None):
        self.row = row
        self.col = col
        super().__init__(message)


class EmptyAfterFilter(DataError):
    code = "EMPTY_AFTER_FILTER"
