"""Hot-kernel backend selection.

The compiled extension is used when available; the numpy implementation in
`pure.py` is the fallback. Set SAL360_BACKEND=python to force the fallback,
SAL360_BACKEND=ext to require the extension (ImportError if missing).
"""

import os

from . import pure

_choice = os.environ.get("SAL360_BACKEND", "auto")

if _choice == "python":
    _impl = pure
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "ext"
    except ImportError:
        if _choice == "ext":
            raise
        _impl = pure
        BACKEND = "python"

im2col = _impl.im2col
col2im_add = _impl.col2im_add
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
