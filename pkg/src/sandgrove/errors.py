"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`SandgroveError`.
Input-validation problems additionally derive from :class:`ValueError` so that
callers catching the builtin keep working.
"""


class SandgroveError(Exception):
    """Base class for all library errors."""


class InputError(SandgroveError, ValueError):
    """Invalid argument or malformed input."""


# graphcore
class DisconnectedGraph(InputError):
    pass


class EmptyVertexSet(InputError):
    pass


class UnsupportedFamily(InputError):
    pass


class SingularMatrix(InputError):
    pass


class TooManyTrees(InputError):
    pass


# sandpile
class TooLarge(InputError):
    pass


class UnknownVertex(InputError, KeyError):
    pass


class InvalidDistribution(InputError):
    pass


class UnstableInput(InputError):
    pass


# bijection
class SizeMismatch(InputError):
    pass


class NotRecurrent(InputError):
    pass


class InvalidTree(InputError):
    pass


# spanning
class EmptyPath(InputError):
    pass


class NotNested(InputError):
    pass


class RecurrentFamily(InputError):
    pass


class HorizonExceedsPath(InputError):
    pass


# limits
class WindowOutsideVolume(InputError):
    pass


class MismatchedGraphs(InputError):
    pass


class InvalidStrip(InputError):
    pass


class SiteOnBoundary(InputError):
    pass


# treeexact
class InvalidDegree(InputError):
    pass


class CEqualsBoundary(InputError):
    pass


class WindowTooLarge(InputError):
    pass
