"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ParseError and ValidationError are
input problems (exit 2), DomainError is a numerical/domain failure
(exit 3).
"""


class TreespaceError(Exception):
    pass


class ParseError(TreespaceError):
    """Malformed Newick, FASTA or PHYLIP input."""


class ValidationError(TreespaceError):
    """Structurally valid input that violates a precondition
    (mismatched leaf sets, incompatible splits, ragged rows, ...)."""


class DomainError(TreespaceError):
    """Out-of-domain numerical request (JC69 saturation, bad kernel
    rate, out-of-range cut, ...)."""
