"""Kernel backend selection.

The compiled Cython core is preferred when its extension module was built;
otherwise the pure-numpy implementations are used. Both expose the same four
functions. `backend()` reports which one is live, and `set_backend()` lets
the benchmark (or a test) force a choice explicitly.
"""

from gcart.kernels import numpy_backend

try:
    from gcart.kernels import _core

    _DEFAULT = _core
except ImportError:
    _core = None
    _DEFAULT = numpy_backend

_active = _DEFAULT


def available_backends():
    names = ["numpy"]
    if _core is not None:
        names.append("cython")
    return names


def backend() -> str:
    """Name of the backend currently serving kernel calls."""
    return _active.NAME


def set_backend(name: str):
    """Force a backend by name ('numpy' or 'cython'). Returns the module."""
    global _active
    if name == "numpy":
        _active = numpy_backend
    elif name == "cython":
        if _core is None:
            raise RuntimeError("cython kernel extension is not built")
        _active = _core
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    return _active


def _c(arr):
    import numpy as np

    return np.ascontiguousarray(arr, dtype=np.float64)


def hist_forward(x, centers, gamma):
    return _active.hist_forward(_c(x), _c(centers), gamma)


def hist_backward(x, centers, gamma, gout):
    return _active.hist_backward(_c(x), _c(centers), gamma, _c(gout))


def curve_forward(x, a, b, d, e):
    return _active.curve_forward(_c(x), _c(a), _c(b), _c(d), _c(e))


def curve_backward(x, a, b, d, e, gy):
    return _active.curve_backward(_c(x), _c(a), _c(b), _c(d), _c(e), _c(gy))
