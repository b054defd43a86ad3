"""Papangelou point processes on finite discrete spaces."""

from .core import (Config, Kernel, Measure, ParameterError, SiteMap, Space, enumerate_configs,
                   to_jsonable)  # noqa: F401
from .kernels import *  # noqa: F401,F403
from .partition import *  # noqa: F401,F403
from .samplers import *  # noqa: F401,F403
from .checks import *  # noqa: F401,F403
from .extract import *  # noqa: F401,F403
from .gnz import *  # noqa: F401,F403

__version__ = "0.1.0"
