"""Feedback-driven suggestion timing: bounded delay controller, session
simulator, and deployment statistics."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
