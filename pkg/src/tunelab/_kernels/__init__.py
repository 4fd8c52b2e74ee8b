"""Numeric hot kernels with a compiled core and a pure-python fallback.

The Cython extension ``_corekernels`` is optional: if it was not built (or
``TUNELAB_PURE_PYTHON=1`` is set), the numpy implementations in
``_fallback`` are used instead. Both backends expose the same three
functions and agree to floating-point noise; ``benchmarks/kernel_bench.py``
compares their throughput.
"""

import os

__all__ = [
    "BACKEND",
    "gauss_corr_matrix",
    "gauss_corr_cross",
    "minkowski_cdist",
    "available_backends",
]


def _load():
    force_fallback = os.environ.get("TUNELAB_PURE_PYTHON", "") not in ("", "0")
    if not force_fallback:
        try:
            from . import _corekernels

            return _corekernels, "compiled"
        except ImportError:
            pass
    from . import _fallback

    return _fallback, "fallback"


_impl, BACKEND = _load()

gauss_corr_matrix = _impl.gauss_corr_matrix
gauss_corr_cross = _impl.gauss_corr_cross
minkowski_cdist = _impl.minkowski_cdist


def available_backends():
    """Return the importable backend modules keyed by name."""
    from . import _fallback

    backends = {"fallback": _fallback}
    try:
        from . import _corekernels

        backends["compiled"] = _corekernels
    except ImportError:
        pass
    return backends
