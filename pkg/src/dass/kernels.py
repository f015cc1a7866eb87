"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``DASS_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the NumPy fallback is used.  ``BACKEND`` names the active one.
"""
import os

from . import _pykernels

_force_py = os.environ.get("DASS_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python backend forced")
    from . import _ext as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

greedy_eliminate = _impl.greedy_eliminate
fista_lasso = _impl.fista_lasso


def get_backend(name: str):
    """Return the kernel module called ``name`` ('cython' or 'python')."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ext
        return _ext
    raise ValueError(f"unknown backend {name!r}")
