"""Finite-dimensional POVM toolkit.

Certifies the optimality properties of discrete quantum observables (rank-1,
informational completeness, extremality, norm-1), builds minimal Naimark
dilations, post- and pre-processes observables, relates joint observables to
sequential measurements and simulates measurement statistics.
"""
from . import errors
from .certify import *  # noqa: F401,F403
from .dilation import *  # noqa: F401,F403
from .generate import *  # noqa: F401,F403
from .instrument import *  # noqa: F401,F403
from .numerics import *  # noqa: F401,F403
from .observable import *  # noqa: F401,F403
from .process import *  # noqa: F401,F403
from .simulate import *  # noqa: F401,F403

__version__ = "0.1.0"
