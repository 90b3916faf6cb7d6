"""Time-stepping kernels with backend selection.

The compiled Cython extension is used when available; setting the
environment variable ``CONTLAB_PURE=1`` forces the pure-Python twin.
Both expose the same five functions with identical numerics.
"""

import os

from . import _pure

if os.environ.get("CONTLAB_PURE") == "1":
    _impl = _pure
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pure

BACKEND = _impl.BACKEND

open_loop_run = _impl.open_loop_run
cbc_run = _impl.cbc_run
acbc_sweep = _impl.acbc_sweep
pll_run = _impl.pll_run
monodromy = _impl.monodromy

__all__ = [
    "BACKEND",
    "open_loop_run",
    "cbc_run",
    "acbc_sweep",
    "pll_run",
    "monodromy",
]
