"""Kernel backend selection.

Prefers the compiled Cython core; falls back to the numpy implementation.
Set HOTWALL_PURE_PYTHON=1 to force the fallback (used by the benchmark and
by tests that exercise both backends).
"""

from __future__ import annotations

import os

if os.environ.get("HOTWALL_PURE_PYTHON"):
    from hotwall import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from hotwall import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from hotwall import _kernels_py as _impl

        BACKEND = "python"

cross_scan = _impl.cross_scan
kahan_cumsum = _impl.kahan_cumsum

__all__ = ["cross_scan", "kahan_cumsum", "BACKEND"]
