"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-NumPy kernels when
the extension was not built.  Set ``H2NMF_PURE_PYTHON=1`` to force the
fallback (useful for benchmarking and debugging).
"""

import os

if os.environ.get("H2NMF_PURE_PYTHON"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
