"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``ROUGHLAB_PURE=1`` to
force the numpy fallback (useful for benchmarking and for checking that
both backends agree).
"""
import os

from . import _pure

BACKEND = "pure"
_impl = _pure
if os.environ.get("ROUGHLAB_PURE") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure

doubling_chunk = _impl.doubling_chunk
lsv_chunk = _impl.lsv_chunk
qvar_first = _impl.qvar_first
qvar_second = _impl.qvar_second


def backends():
    """Return the available kernel modules keyed by name."""
    out = {"pure": _pure}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
