"""Kernel backend selection.

The compiled extension is used when importable; set ``QFEATURES_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

if os.environ.get("QFEATURES_PURE_PYTHON", "") not in ("", "0"):
    from ._fallback import BACKEND, cd_epoch, project, run_gates
else:
    try:
        from ._core import BACKEND, cd_epoch, project, run_gates
    except ImportError:  # extension not built
        from ._fallback import BACKEND, cd_epoch, project, run_gates

from . import _fallback as fallback

__all__ = ["BACKEND", "cd_epoch", "project", "run_gates", "fallback", "compiled"]


def compiled():
    """Return the compiled kernel module, or None if it is not built."""
    try:
        from . import _core
    except ImportError:
        return None
    return _core
