"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: contract/validation problems exit 1,
parse/format problems (anything wrong with a file's content) exit 2.
"""


class SparselectError(Exception):
    """Base class for every toolkit error."""


class ContractError(SparselectError):
    """A documented precondition was violated by the caller."""


class ValidationError(SparselectError):
    """Data failed an invariant check (non-finite values and the like)."""


class ParseError(SparselectError):
    """A text input could not be parsed; the message names the location."""


class FormatError(SparselectError):
    """A binary input does not follow the documented file format."""


class TruncationError(FormatError):
    """A binary payload is shorter or longer than its header promises."""


class DivergenceError(SparselectError):
    """An iterative solver's objective increased materially."""
