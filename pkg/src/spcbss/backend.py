"""Kernel backend selection.

The hot kernels exist twice: a compiled Cython extension and a pure
numpy twin with identical signatures. The compiled one is used when it
imports cleanly; set SPCBSS_NO_EXT=1 to force the pure path. Both
modules stay importable for side-by-side testing and benchmarking.
"""

import os

from . import _kernels_py as pure

compiled = None
if os.environ.get("SPCBSS_NO_EXT", "0") != "1":
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

active = compiled if compiled is not None else pure

dilated_filter_rows = active.dilated_filter_rows
threshold_rows = active.threshold_rows
lq_column_norms = active.lq_column_norms


def backend_name():
    """Name of the kernel set in use, 'compiled' or 'python'."""
    return "compiled" if active is not pure else "python"
