"""Pick the compiled kernels when they import, otherwise the numpy fallback.

Set ``L0FOURIER_PURE=1`` to force the fallback (used by the benchmark and by
the parity tests).
"""

import logging
import os

log = logging.getLogger(__name__)

if os.environ.get("L0FOURIER_PURE", "") not in ("", "0"):
    from . import _fallback as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _fallback as kernels
        BACKEND = "python"
        log.debug("compiled kernels unavailable, using numpy fallback")

__all__ = ["kernels", "BACKEND"]
