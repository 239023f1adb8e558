"""Exception hierarchy shared by the library, the HTTP service, and the CLI.

Each error carries a stable short code so the service can report it in a
structured payload and the CLI can map it to a distinct exit status.
"""


class SubedgeError(Exception):
    """Base class for all contour-pipeline failures."""

    code = "error"
    exit_code = 1


class InputOutputError(SubedgeError):
    """File could not be read, parsed, or written."""

    code = "io"
    exit_code = 2


class NoEdgesError(SubedgeError):
    """Edge detection produced no usable pixels."""

    code = "no-edges"
    exit_code = 3


class AmbiguousTopologyError(SubedgeError):
    """Edge pixels split into several connected components."""

    code = "ambiguous-topology"
    exit_code = 4


class UnderdeterminedError(SubedgeError):
    """Too few observations for the requested number of control points."""

    code = "underdetermined"
    exit_code = 5


class SingularSystemError(SubedgeError):
    """Normal equations are singular and no ridge term was requested."""

    code = "singular-system"
    exit_code = 6


class NotAMaximumError(SubedgeError):
    """Quadratic peak interpolation called on samples without a central maximum."""

    code = "not-a-maximum"


class DomainError(ValueError):
    """Curve parameter lies outside the evaluable knot span."""
