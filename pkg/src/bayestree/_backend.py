"""Kernel selection: the compiled core when importable, else pure Python.

Set ``BAYESTREE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernel

python_kernel = _pykernel

try:
    from . import _kernel as compiled_kernel
except ImportError:  # extension not built
    compiled_kernel = None

if compiled_kernel is not None and not os.environ.get("BAYESTREE_PURE_PYTHON"):
    kernel = compiled_kernel
else:
    kernel = _pykernel

BACKEND = kernel.BACKEND


def available_kernels():
    """All importable kernels, compiled first."""
    out = {}
    if compiled_kernel is not None:
        out["compiled"] = compiled_kernel
    out["python"] = _pykernel
    return out


def get_kernel(name=None):
    if name is None:
        return kernel
    kernels = available_kernels()
    if name not in kernels:
        raise ValueError(f"kernel {name!r} is not available (have {sorted(kernels)})")
    return kernels[name]
