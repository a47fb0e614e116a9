"""Kernel selection.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``DMCIS_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the pure-Python implementation is used. Both give bit-identical
results.
"""

import os

_force_python = os.environ.get("DMCIS_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    from dmcis import _kernels_py as _impl
else:
    try:
        from dmcis._ext import _kernels as _impl
    except ImportError:
        from dmcis import _kernels_py as _impl

BACKEND = _impl.BACKEND
field_intensities = _impl.field_intensities
in_range_mask = _impl.in_range_mask
