"""Kernel selection: compiled extension when available, pure Python otherwise.

Set CLAIR_EVAL_PURE_PYTHON=1 to force the fallback (useful for debugging and
for benchmarking the two backends against each other).
"""

from __future__ import annotations

import os

if os.environ.get("CLAIR_EVAL_PURE_PYTHON"):
    from clair_eval import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from clair_eval import _ckernels as _impl

        BACKEND = "compiled"
    except ImportError:
        from clair_eval import _kernels_py as _impl

        BACKEND = "python"

lcs_length = _impl.lcs_length
kendall_pair_counts = _impl.kendall_pair_counts
