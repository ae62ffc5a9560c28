"""Pick the stencil kernel implementation at import time.

The compiled extension is used when it was built; otherwise the numpy
fallback.  Set ``TRUDLAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("TRUDLAB_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as kernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        from . import _pykernels as kernels

BACKEND = kernels.BACKEND
