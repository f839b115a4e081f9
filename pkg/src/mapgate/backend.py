"""Propagation-kernel backend selection.

The compiled Cython kernel is used when the extension was built; otherwise
(or when MAPGATE_PURE_PYTHON=1 is set) the NumPy implementation takes over.
Both expose the same ``propagate_chain`` contract and are tested for
agreement; ``benchmarks/bench_backends.py`` compares their throughput.
"""

import os

if os.environ.get("MAPGATE_PURE_PYTHON", "0") not in ("", "0"):
    from . import _kernel_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        from . import _kernel_py as _impl
        BACKEND = "python"

propagate_chain = _impl.propagate_chain


def backend_name() -> str:
    """Name of the active kernel backend: "compiled" or "python"."""
    return BACKEND
