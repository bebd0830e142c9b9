"""Hot grid kernels with selectable backend.

Backend resolution, controlled by the ANCHORREF_BACKEND environment
variable read once at import:

  numba  - require the numba-compiled kernels (raise if numba is missing)
  numpy  - force the pure-numpy fallback
  auto   - numba when importable, else numpy (default)

Both backends share signatures and float64 accumulation; they agree to
tight tolerance (see tests) but are not guaranteed bit-identical to each
other because summation order differs. Within one backend, results are
deterministic.
"""
from __future__ import annotations

import os

from . import _numpy

_requested = os.environ.get("ANCHORREF_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"unknown ANCHORREF_BACKEND value: {_requested!r}")

if _requested == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = _numpy
        BACKEND = "numpy"

gaussian_blur = _impl.gaussian_blur
masked_mean_channels = _impl.masked_mean_channels
masked_mean_grid = _impl.masked_mean_grid
masked_mean_mul = _impl.masked_mean_mul
box_mean = _impl.box_mean
gaussian_kernel_1d = _numpy.gaussian_kernel_1d

__all__ = [
    "BACKEND",
    "gaussian_blur",
    "gaussian_kernel_1d",
    "masked_mean_channels",
    "masked_mean_grid",
    "masked_mean_mul",
    "box_mean",
]
