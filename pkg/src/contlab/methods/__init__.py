"""Testing and continuation methods run against black-box plants."""

from .acbc import NoIntersectionError, acbc, sweep_law
from .cbc_fd import cbc_fd
from .pll import pll
from .rct import rct
from .scbc import scbc, scbc_surface
from .stepped import stepped_sine
from .sws import swept_sine

__all__ = [
    "NoIntersectionError", "acbc", "sweep_law", "cbc_fd", "pll", "rct",
    "scbc", "scbc_surface", "stepped_sine", "swept_sine",
]
