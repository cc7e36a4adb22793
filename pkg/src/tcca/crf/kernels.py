"""Kernel selection: compiled extension when available, NumPy otherwise.

Set ``TCCA_PURE_PYTHON=1`` to force the NumPy fallback (used by the kernel
equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _kernels_np

if os.environ.get("TCCA_PURE_PYTHON", "") == "1":
    _impl = _kernels_np
else:
    try:
        from . import _chain_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_np

KERNEL_BACKEND = "compiled" if _impl is not _kernels_np else "numpy"

log_partition = _impl.log_partition
forward_backward = _impl.forward_backward
viterbi = _impl.viterbi
