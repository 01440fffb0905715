"""Abelian sandpiles on wired graphs: exact finite-volume tools, local
sampling through uniform spanning trees, and infinite-volume experiments."""

from .bijection import *  # noqa: F401,F403
from .errors import *  # noqa: F401,F403
from .graphcore import *  # noqa: F401,F403
from .limits import *  # noqa: F401,F403
from .sandpile import *  # noqa: F401,F403
from .spanning import *  # noqa: F401,F403
from .treeexact import *  # noqa: F401,F403

__version__ = "0.1.0"
