from ._avth import *  # noqa: F401,F403
from ._avth import __version__  # noqa: F401
