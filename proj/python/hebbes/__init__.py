"""Hebbian meta-learning: plastic networks, genotype distributions and an
evolution-strategies meta-optimizer, backed by the C++ core."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
