"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
fallback.  Set ``MMSARC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("MMSARC_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

dcd_epoch = _impl.dcd_epoch
csr_dot = _impl.csr_dot

__all__ = ["BACKEND", "dcd_epoch", "csr_dot"]
