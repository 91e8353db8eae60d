"""Select the kernel implementation at import time.

The compiled ``_kernels`` extension is used when importable; otherwise the
pure-Python ``_kernels_py``.  Setting ``ROBUSTIIS_PURE_PYTHON=1`` forces the
fallback.
"""
import os

from . import _kernels_py

kernels = _kernels_py
NAME = "python"

if not os.environ.get("ROBUSTIIS_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        kernels = _compiled
        NAME = "cython"


def available():
    """Names and modules of every backend importable in this environment."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as compiled
    except ImportError:
        return out
    out["cython"] = compiled
    return out
