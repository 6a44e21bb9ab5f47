"""Backend selection for the numerical kernels.

The compiled extension is used when importable; setting the environment
variable ``MDWELFARE_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _pykernels as python_backend

try:
    if os.environ.get("MDWELFARE_PURE_PYTHON", "0") not in ("", "0"):
        raise ImportError("pure python backend requested")
    from . import _kernels as compiled_backend
except ImportError:
    compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

bvn_cdf = _impl.bvn_cdf
mvn_qmc = _impl.mvn_qmc
grid_cell_integrals = _impl.grid_cell_integrals


def get_backend(name: str):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "python":
        return python_backend
    if name == "cython":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not available")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
