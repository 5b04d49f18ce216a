"""Distribution grid identification and event monitoring."""
from ._core import *  # noqa: F401,F403
