"""Walk-kernel backend selection.

Imports the compiled extension when available, otherwise the pure-numpy
fallback.  Set ``PATCHWALK_PURE=1`` to force the fallback (used by the
backend-equivalence tests and the benchmark).
"""
import os

from . import _pure

if os.environ.get("PATCHWALK_PURE"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

gcw_uniform_chain = _impl.gcw_uniform_chain
gcw_vmf_chain = _impl.gcw_vmf_chain
regcw_chain = _impl.regcw_chain

pure = _pure


def backend_name() -> str:
    return BACKEND
