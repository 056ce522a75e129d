"""Exception hierarchy shared across the package.

Each error carries the offending index or name so callers (and the CLI)
can produce precise messages without parsing strings.
"""

from __future__ import annotations


class FairGapError(Exception):
    """Base class for every error raised by this package."""


class InputError(FairGapError):
    """Malformed or inconsistent user input."""


class EmptyDataset(InputError):
    pass


class DimensionMismatch(InputError):
    def __init__(self, row: int, expected: int, got: int):
        super().__init__(f"row {row}: expected {expected} features, got {got}")
        self.row = row


class NonBinaryLabel(InputError):
    def __init__(self, row: int, value):
        super().__init__(f"row {row}: label {value!r} is not 0 or 1")
        self.row = row


class MissingGroup(InputError):
    def __init__(self, group):
        super().__init__(f"group {group!r} has no samples")
        self.group = group


class NonFiniteFeature(InputError):
    def __init__(self, row: int):
        super().__init__(f"row {row}: non-finite feature value")
        self.row = row


class InvalidInstance(InputError):
    pass


class GroupWithZeroMass(InputError):
    def __init__(self, group: int):
        super().__init__(f"group {group} has zero probability mass")
        self.group = group


class UnknownSupportPoint(InputError):
    def __init__(self, x_id):
        super().__init__(f"score has no value for support point x={x_id!r}")
        self.x_id = x_id


class UnsupportedScoreVariant(InputError):
    pass


class ValueOutOfRange(InputError):
    pass


class EmptyBucketAll(FairGapError):
    pass


class NonpositiveKappa(InputError):
    pass


class ZeroGroupMass(InputError):
    pass


class DegenerateLabel(FairGapError):
    """Var[Y] = 0, so normalised noise constants are undefined."""


class DegenerateGroupLabel(FairGapError):
    def __init__(self, group: int):
        super().__init__(f"group {group} has base rate 0 or 1")
        self.group = group


class NotSquareLoss(InputError):
    pass


class MissingExcessRisk(InputError):
    pass


class DivergenceDetected(FairGapError):
    def __init__(self, iteration: int, reason: str):
        super().__init__(f"training diverged at iteration {iteration}: {reason}")
        self.iteration = iteration


class EmptySample(InputError):
    pass


class NonUnitTheta(InputError):
    pass


class SpanViolation(InputError):
    """The attribute direction is parallel to the estimate, so level sets do not split."""


class PreconditionViolation(InputError):
    pass


class MissingColumn(InputError):
    def __init__(self, name: str):
        super().__init__(f"missing column {name!r}")
        self.name = name


class ParseError(InputError):
    def __init__(self, row: int, col: str, value):
        super().__init__(f"row {row}, column {col!r}: cannot parse {value!r}")
        self.row = row
        self.col = col


class LabelNotBinary(InputError):
    def __init__(self, row: int, value):
        super().__init__(f"row {row}: label {value!r} is not 0 or 1")
        self.row = row


class ModelMismatch(FairGapError):
    """A model file does not fit the data it is applied to."""
