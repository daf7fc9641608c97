"""Hot kernels with a compiled core and a pure-Python fallback.

The compiled ``_core`` extension is used when it was built and
``RCSLAB_PURE_PYTHON`` is unset; otherwise ``_fallback`` provides the same
functions. ``BACKEND`` names the active implementation.
"""

import importlib
import os

from . import _fallback

_core = None
if not os.environ.get("RCSLAB_PURE_PYTHON"):
    try:
        _core = importlib.import_module(__name__ + "._core")
    except ImportError:
        _core = None

_impl = _core if _core is not None else _fallback
BACKEND = "cython" if _core is not None else "python"

pathsum_amplitude = _impl.pathsum_amplitude
permanent_mod = _impl.permanent_mod
permanent_complex = _impl.permanent_complex
rref_mod = _impl.rref_mod


def apply_gate(state, matrix, targets, n):
    """Apply a gate; object-dtype (arbitrary precision) states use numpy."""
    if _core is not None and state.dtype.kind == "c" and matrix.dtype.kind == "c":
        return _core.apply_gate(state, matrix, tuple(targets), n)
    return _fallback.apply_gate(state, matrix, targets, n)


def backends():
    """Return ``{name: module}`` for every importable implementation."""
    found = {"python": _fallback}
    if _core is not None:
        found["cython"] = _core
    return found
