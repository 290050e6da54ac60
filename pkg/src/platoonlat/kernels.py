"""Integrator kernel selection.

The compiled extension is used when it imports; otherwise the pure-Python
loop.  Set ``PLATOONLAT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("PLATOONLAT_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
affine_recursion = (_compiled or _kernels_py).affine_recursion
