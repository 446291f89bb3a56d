"""Kernel backend selection.

The compiled Cython kernels are preferred when the extension built; the
pure-numpy module is a drop-in fallback.  Set SHEAFCOORD_BACKEND=python or
=compiled to force a choice ("compiled" raises if the extension is missing).
"""

from __future__ import annotations

import os

_choice = os.environ.get("SHEAFCOORD_BACKEND", "auto").strip().lower() or "auto"

if _choice not in ("auto", "compiled", "python"):
    raise ValueError(
        f"SHEAFCOORD_BACKEND must be 'auto', 'compiled', or 'python'; got {_choice!r}"
    )

if _choice == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "SHEAFCOORD_BACKEND=compiled but the _kernels extension is not built"
            ) from None
        from . import _kernels_py as _impl

cob_apply = _impl.cob_apply
cobt_apply = _impl.cobt_apply
lap_apply = _impl.lap_apply
euler_chunk = _impl.euler_chunk


def backend_name() -> str:
    """Which kernel implementation is active: 'compiled' or 'python'."""
    return _impl.NAME
