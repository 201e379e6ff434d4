"""Hot kernels: compiled Cython build when available, pure Python otherwise.

Set ``ATOMSIM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _purepy
from .common import *  # noqa: F401,F403

if os.environ.get("ATOMSIM_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _impl = _purepy
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _purepy

IMPLEMENTATION = _impl.IMPLEMENTATION
rhs = _impl.rhs
integrate = _impl.integrate
lyapunov = _impl.lyapunov


def backend(name):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "python":
        return _purepy
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
