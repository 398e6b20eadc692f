"""Exception hierarchy shared across the toolkit."""


class ProbmolError(Exception):
    """Base class for every error raised by this package."""


# --- parsing -----------------------------------------------------------------

class SmilesError(ProbmolError, ValueError):
    """A SMILES string could not be turned into a molecular graph."""


class EmptyInput(SmilesError):
    pass


class UnclosedRing(SmilesError):
    pass


class UnmatchedParenthesis(SmilesError):
    pass


class UnknownElement(SmilesError):
    pass


class ValenceOverflow(SmilesError):
    pass


class InvalidAromaticity(SmilesError):
    pass


# --- features / models -------------------------------------------------------

class WidthMismatch(ProbmolError, ValueError):
    pass


class ShapeMismatch(ProbmolError, ValueError):
    pass


class SingularKernel(ProbmolError, ArithmeticError):
    pass


class DegenerateLabels(ProbmolError, ValueError):
    """Only one class present where two are required (or constant targets)."""


class FeatureKindMismatch(ProbmolError, TypeError):
    pass


class InvalidParams(ProbmolError, ValueError):
    pass


class NotFitted(ProbmolError, RuntimeError):
    pass


# --- metrics -----------------------------------------------------------------

class ConstantTruth(ProbmolError, ValueError):
    pass


class NonpositiveSigma(ProbmolError, ValueError):
    pass


class ResampleExhausted(ProbmolError, RuntimeError):
    pass


# --- splits ------------------------------------------------------------------

class TooFewItems(ProbmolError, ValueError):
    pass


class TooFewClusters(ProbmolError, ValueError):
    pass


# --- optimization ------------------------------------------------------------

class EmptyPool(ProbmolError, ValueError):
    pass


class InitTooSmall(ProbmolError, ValueError):
    pass


class NoBothClasses(ProbmolError, ValueError):
    pass


# --- harness -----------------------------------------------------------------

class MissingColumn(ProbmolError, ValueError):
    pass


class InvalidTarget(ProbmolError, ValueError):
    pass


class ParseFailure(ProbmolError, ValueError):
    """One or more dataset rows failed to parse; ``rows`` holds 1-based line numbers."""

    def __init__(self, rows, messages=None):
        self.rows = list(rows)
        self.messages = list(messages or [])
        preview = ", ".join(str(r) for r in self.rows[:10])
        more = "" if len(self.rows) <= 10 else f" (+{len(self.rows) - 10} more)"
        super().__init__(f"unparseable SMILES on row(s) {preview}{more}")


class NetworkFailure(ProbmolError, OSError):
    pass


class ChecksumMismatch(ProbmolError, ValueError):
    pass


class UnknownDataset(ProbmolError, KeyError):
    pass


class MissingResults(ProbmolError, FileNotFoundError):
    pass
