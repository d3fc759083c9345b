"""Transportation mode detection pipeline: python bindings for the C++ core."""

from ._tmd import *  # noqa: F401,F403
from ._tmd import __version__  # noqa: F401
