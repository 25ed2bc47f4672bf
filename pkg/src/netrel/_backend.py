"""Select the kernel implementation at import time.

The compiled extension is used when it was built; setting ``NETREL_PURE_PYTHON=1``
forces the numpy fallback (used by the benchmark and the parity tests).
"""
import importlib
import os

from . import _fallback


def _load_compiled():
    try:
        return importlib.import_module("netrel._kernels")
    except ImportError:
        return None


compiled = _load_compiled()

if compiled is not None and not os.environ.get("NETREL_PURE_PYTHON"):
    kernels = compiled
    COMPILED = True
else:
    kernels = _fallback
    COMPILED = False

fallback = _fallback
