"""Backend selection for the walk kernels.

The compiled extension is used when it imports; otherwise the numpy twin.
Set ``SIGMA_LAB_PURE_PYTHON=1`` to force the fallback. Both backends produce
identical arrays for identical arguments.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

if _ckernels is not None and not os.environ.get("SIGMA_LAB_PURE_PYTHON"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]
walk_sums = _impl.walk_sums
abs_endpoints = _impl.abs_endpoints
mix64 = _pykernels.mix64_int
