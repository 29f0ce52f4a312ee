"""
Exception hierarchy for the sparse-AD toolkit

Library code raises these; only main.py turns them into exit codes.
"""
from typing import Optional, Sequence


class SparseADError(Exception):
    """Base class for every error raised by the toolkit"""


# Expressions

class ExpressionSyntaxError(SparseADError):
    """Expression text does not match the grammar"""

    def __init__(self, text: str, position: int, found: str, expected: Sequence[str]):
        self.text = text
        self.position = position
        self.found = found
        self.expected = tuple(expected)
        super().__init__(
            f"syntax error at position {position} (token {found!r}): "
            f"expected {' or '.join(self.expected)}"
        )


class UnknownVariableError(SparseADError):
    """Variable name outside the declared x<k>, u<k>, t ranges"""


class UnknownFunctionError(SparseADError):
    """Call to a function outside sin, cos, tan, exp, log, sqrt"""


class DomainError(SparseADError):
    """Expression evaluated to a non-finite value"""

    def __init__(self, row: int, label: Optional[str] = None):
        self.row = row
        self.label = label
        where = f" in {label}" if label else ""
        super().__init__(f"non-finite value{where} at mesh row {row}")


# Expression graphs

class IndexOutOfRangeError(SparseADError):
    """Input variable index outside the decision vector"""


class UnknownArgumentError(SparseADError):
    """Node argument refers to a node that does not exist yet"""


class PartialIndexOutOfRangeError(SparseADError):
    """Partial-derivative position outside a node's argument list"""


class SweepOrderViolationError(SparseADError):
    """Node swept before one of its arguments"""


class ScalarDependsOnVectorError(SparseADError):
    """Scalar node given a vector argument"""


class DimensionMismatchError(SparseADError):
    """Array or list length disagrees with the declared shape"""


# Collocation mesh

class MeshSpecError(SparseADError):
    """Malformed mesh description"""


class MeshNotIncreasingError(MeshSpecError):
    """Segment boundaries are not strictly increasing"""


class DegreeOutOfRangeError(MeshSpecError):
    """Segment degree outside 1..MAX_SEGMENT_DEGREE"""


class ConvergenceFailureError(SparseADError):
    """LGR root polishing did not reach the residual tolerance"""


# Transcription and verification

class NonFiniteInputError(SparseADError):
    """Decision vector contains NaN or infinity"""


class NonFiniteStencilError(SparseADError):
    """Finite-difference stencil hit a non-finite function value"""


class ShapeMismatchError(SparseADError):
    """Compared arrays have different shapes"""


class ProblemFileError(SparseADError):
    """Problem file is missing a key or has a malformed value"""
