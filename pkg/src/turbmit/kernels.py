"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy/scipy implementations in ``_pykernels`` are used. Setting
``TURBMIT_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

if os.environ.get("TURBMIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND

warp_bilinear = _impl.warp_bilinear
box_mean = _impl.box_mean
min_filter = _impl.min_filter
max_filter = _impl.max_filter
lk_solve = _impl.lk_solve
lk_level = _impl.lk_level


def available_backends():
    """Return the kernel modules importable in this environment, keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
