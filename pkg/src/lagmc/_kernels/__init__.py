"""Hot per-node kernels with a compiled core and a numpy fallback.

The compiled extension ``_jacobi`` is used when it imports cleanly, unless
``LAGMC_PURE_PYTHON`` is set to a non-empty value other than ``0``.
``BACKEND`` names the active implementation.
"""

import os

from . import fallback

_force_python = os.environ.get("LAGMC_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = fallback
    BACKEND = "python"
else:
    try:
        from . import _jacobi as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = fallback
        BACKEND = "python"

jacobi_eigh = _impl.jacobi_eigh
phase_and_inverse_metric = _impl.phase_and_inverse_metric


def compiled_available():
    """Return True if the compiled extension can be imported."""
    try:
        from . import _jacobi  # noqa: F401
    except ImportError:
        return False
    return True


def get_backend(name):
    """Return the kernel module named ``"compiled"`` or ``"python"``."""
    if name == "python":
        return fallback
    if name == "compiled":
        from . import _jacobi
        return _jacobi
    raise ValueError(f"unknown backend {name!r}")
