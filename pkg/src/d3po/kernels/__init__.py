"""Kernel backend selection.

The numeric core routes every hot operation (dense products, activations,
fused optimizer updates) through this module.  At import time we load the
compiled Cython extension if it built, otherwise the numpy fallback.  Set
``D3PO_KERNELS=numpy`` or ``D3PO_KERNELS=compiled`` to force a backend;
forcing ``compiled`` when the extension is missing is an import error rather
than a silent downgrade.
"""

from __future__ import annotations

import os

from . import _fallback

_choice = os.environ.get("D3PO_KERNELS", "auto").lower()

if _choice not in ("auto", "numpy", "compiled"):
    raise ImportError(f"D3PO_KERNELS must be auto|numpy|compiled, got {_choice!r}")

if _choice == "numpy":
    impl = _fallback
else:
    try:
        from . import _compiled as impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise
        impl = _fallback

BACKEND = impl.NAME

matmul = impl.matmul
matmul_nt = impl.matmul_nt
matmul_tn = impl.matmul_tn
add_rowvec = impl.add_rowvec
colsum = impl.colsum
tanh_fwd = impl.tanh_fwd
tanh_bwd = impl.tanh_bwd
sqsum = impl.sqsum
sqsum_diff = impl.sqsum_diff
sqsum_diff_bwd = impl.sqsum_diff_bwd
submul_scalar = impl.submul_scalar
submul_rows = impl.submul_rows
lincomb = impl.lincomb
scale = impl.scale
scale_inplace = impl.scale_inplace
gather_rows = impl.gather_rows
scatter_add_rows = impl.scatter_add_rows
adam_update = impl.adam_update
