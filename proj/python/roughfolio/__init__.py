from ._roughfolio import *  # noqa: F401,F403
from ._roughfolio import __version__  # noqa: F401
