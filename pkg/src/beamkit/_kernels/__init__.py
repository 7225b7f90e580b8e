"""Hot per-bin kernels: compiled extension when available, numpy otherwise.

Set BEAMKIT_KERNELS=python to force the numpy fallback. Callers go through
the module attributes (``_kernels.quad_forms(...)``) so benchmarks can swap
implementations at runtime.
"""

import os
import warnings

from . import _numpy

if os.environ.get("BEAMKIT_KERNELS", "").strip().lower() in {"py", "python", "numpy"}:
    _impl = _numpy
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        warnings.warn(
            "compiled kernels unavailable, using the numpy fallback; "
            "rebuild with `pip install -e . --no-build-isolation` for the extension",
            stacklevel=2,
        )
        _impl = _numpy
        BACKEND = "python"

accumulate_weighted_outer = _impl.accumulate_weighted_outer
quad_forms = _impl.quad_forms
chol_inverse_logdet = _impl.chol_inverse_logdet


def backend() -> str:
    """Name of the kernel implementation selected at import."""
    return BACKEND
