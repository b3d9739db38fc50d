"""Quantum Rabi model with two-photon loss."""

from ._openrabi import *  # noqa: F401,F403
from ._openrabi import __version__  # noqa: F401
