"""Hot numeric kernels with two interchangeable backends.

The numba backend carries ``@njit`` loops; the numpy backend is a pure
vectorized re-statement of the same arithmetic in the same operation order,
so both produce bit-identical results.  Selection:

* ``MITODG_NO_NUMBA=1`` in the environment forces the numpy path;
* otherwise numba is used when importable, numpy when not.

``BACKEND`` names the active path; ``benchmarks/bench_kernels.py`` compares
the two.
"""

from __future__ import annotations

import os

__all__ = [
    "BACKEND",
    "clahe_interpolate",
    "separable_blur_u8",
    "mean_max_iou",
    "mean_max_iou_batch",
    "suppress_by_center",
]


def _numba_disabled() -> bool:
    return os.environ.get("MITODG_NO_NUMBA", "").strip() not in ("", "0", "false", "False")


if not _numba_disabled():
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        from . import numpy_impl as _impl

        BACKEND = "numpy"
else:
    from . import numpy_impl as _impl

    BACKEND = "numpy"

clahe_interpolate = _impl.clahe_interpolate
separable_blur_u8 = _impl.separable_blur_u8
mean_max_iou = _impl.mean_max_iou
mean_max_iou_batch = _impl.mean_max_iou_batch
suppress_by_center = _impl.suppress_by_center
