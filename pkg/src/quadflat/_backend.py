"""Pick the kernel implementation at import time.

The compiled extension is used when it was built; set ``QUADFLAT_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

kernels = _kernels_py
compiled = None

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("QUADFLAT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    kernels = compiled

BACKEND = kernels.BACKEND
