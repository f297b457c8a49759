"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``SHIFTBOUNDS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
band_sum = _kernels_py.band_sum
correlate = _kernels_py.correlate

if not os.environ.get("SHIFTBOUNDS_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        band_sum = _compiled.band_sum
        correlate = _compiled.correlate

__all__ = ["BACKEND", "band_sum", "correlate"]
