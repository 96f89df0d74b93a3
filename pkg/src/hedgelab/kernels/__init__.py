"""Hot-kernel backend selection.

The compiled extension (``_native``, Cython) is preferred when it imported
cleanly; the vectorised numpy module (``_pyref``) is the fallback. Set
``HEDGELAB_KERNELS=python`` or ``=native`` to force a backend;
forcing ``native`` raises if the extension is unavailable.
"""

import os

from . import _pyref

_FORCED = os.environ.get("HEDGELAB_KERNELS", "").strip().lower()
if _FORCED not in ("", "native", "python"):
    raise ImportError(f"HEDGELAB_KERNELS must be 'native' or 'python', got {_FORCED!r}")

if _FORCED == "python":
    _impl = _pyref
else:
    try:
        from . import _native as _impl
    except ImportError:
        if _FORCED == "native":
            raise
        _impl = _pyref

BACKEND = _impl.BACKEND

counter_uniform = _impl.counter_uniform
counter_normals = _impl.counter_normals
ndtri = _impl.ndtri
gbm_scenarios = _impl.gbm_scenarios
bs_grid = _impl.bs_grid
pnl_terms = _impl.pnl_terms


def available_backends():
    """Importable backend modules keyed by name (for tests and benchmarks)."""
    found = {"python": _pyref}
    try:
        from . import _native
        found["native"] = _native
    except ImportError:
        pass
    return found
