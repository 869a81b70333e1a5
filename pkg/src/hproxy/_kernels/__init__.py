"""Hot rasterization kernels: compiled Cython core with a numpy fallback.

The compiled extension is preferred when importable; set HPROXY_PURE=1 to
force the numpy path. Both backends evaluate the same arithmetic in the
same order (the extension is built with FMA contraction disabled), so
their outputs are bit-identical.
"""

import os

from . import _numpy

_impl = _numpy
BACKEND = "numpy"

if os.environ.get("HPROXY_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        pass

rasterize_core = _impl.rasterize_core
scatter_pixel_gradients = _impl.scatter_pixel_gradients


def available_backends() -> dict:
    """Name -> module map of importable backends (for parity tests and benchmarks)."""
    out = {"numpy": _numpy}
    try:
        from . import _core

        out["compiled"] = _core
    except ImportError:
        pass
    return out
