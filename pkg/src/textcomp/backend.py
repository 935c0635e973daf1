"""Kernel backend selection.

The compiled extension (textcomp._core) is preferred; the numpy fallback
is used when the extension is missing or TEXTCOMP_FORCE_PYTHON is set.
Both implement the same functions with identical floating-point results,
so the choice only affects speed.
"""

import os

from . import _kernels_py

if os.environ.get("TEXTCOMP_FORCE_PYTHON"):
    impl = _kernels_py
else:
    try:
        from . import _core as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _kernels_py

im2col = impl.im2col
col2im = impl.col2im
bilinear_forward = impl.bilinear_forward
bilinear_backward = impl.bilinear_backward
edt_sq_rows = impl.edt_sq_rows


def backend_name() -> str:
    return impl.NAME
