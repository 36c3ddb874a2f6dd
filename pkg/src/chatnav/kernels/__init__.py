"""Grid kernels with a compiled fast path.

Imports the Cython extension when it was built, otherwise the pure-Python
module with identical semantics.  Set CHATNAV_PURE=1 to force the fallback
(used by the parity tests and the kernel benchmark).
"""

import os

from . import _grid_py as pure

if os.environ.get("CHATNAV_PURE"):
    _impl = pure
    USING_COMPILED = False
else:
    try:
        from . import _grid as _impl  # type: ignore[attr-defined]

        USING_COMPILED = True
    except ImportError:
        _impl = pure
        USING_COMPILED = False

cast = _impl.cast
raycast = _impl.raycast
raycast_many = _impl.raycast_many
first_hit = _impl.first_hit
inflate = _impl.inflate
astar = _impl.astar

__all__ = [
    "USING_COMPILED", "pure",
    "cast", "raycast", "raycast_many", "first_hit", "inflate", "astar",
]
