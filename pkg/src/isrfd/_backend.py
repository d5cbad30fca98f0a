"""Select compiled or pure-Python kernels at import time.

Set ``ISRFD_PURE_PYTHON=1`` to force the fallback.
"""

import os

from isrfd import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("ISRFD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from isrfd import _ext as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        kernels = _compiled

__all__ = ["BACKEND", "kernels"]
