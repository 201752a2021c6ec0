"""Exception types raised across the package."""


class HybridGNNError(Exception):
    """Base class for all package-specific errors."""


class UnknownNode(HybridGNNError):
    """An edge endpoint has no type assignment."""


class EmptyGraph(HybridGNNError):
    """The edge stream contained no usable edges."""


class DuplicateTypeAssignment(HybridGNNError):
    """A node was assigned two different types."""


class SchemaViolation(HybridGNNError):
    """A metapath scheme step is not backed by the graph schema.

    ``index`` is the 1-based position of the first offending
    (src_type, relationship, dst_type) triple.
    """

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class NoValidStartNodes(HybridGNNError):
    """No node matches the start type of a walk scheme."""


class TypeMismatch(HybridGNNError):
    """A sampling origin does not match the scheme's start type."""


class TypeExhausted(HybridGNNError):
    """A node type has no candidate other than the excluded node."""


class ShapeMismatch(HybridGNNError):
    """Tensor arguments disagree with the declared parameter shapes."""


class NonFiniteLoss(HybridGNNError):
    """A training step produced a NaN or infinite loss."""


class EmptyTrainingSet(HybridGNNError):
    """The walk corpus produced no training pairs."""


class TooFewEdges(HybridGNNError):
    """A relationship has too few edges to split."""


class SingleClass(HybridGNNError):
    """A metric needs both positive and negative labels."""


class NoPositives(HybridGNNError):
    """A metric needs at least one positive label."""


class SchemaMismatch(HybridGNNError):
    """A checkpoint does not match the loaded graph."""


class UnknownRelationship(HybridGNNError):
    """A relationship label is not present in the graph."""


class UnknownLabel(HybridGNNError):
    """A node-type label is not present in the graph."""


class ParseError(HybridGNNError):
    """An input file line could not be parsed; message names the line."""
