"""Kernel backend selection.

The compiled extension ``lidym._kernels`` is preferred when importable;
``lidym._kernels_np`` is the pure-numpy fallback with identical signatures
and semantics.  Set ``LIDYM_BACKEND=python`` to force the fallback or
``LIDYM_BACKEND=compiled`` to fail loudly if the extension is missing
(default ``auto``).  ``BACKEND`` records which one is active.
"""

import os

from . import _kernels_np

_choice = os.environ.get("LIDYM_BACKEND", "auto")
if _choice not in ("auto", "python", "compiled"):
    raise RuntimeError(f"LIDYM_BACKEND: unknown backend {_choice!r}")

_impl = _kernels_np
BACKEND = "python"
if _choice != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _choice == "compiled":
            raise
    else:
        _impl = _compiled
        BACKEND = "compiled"

regressor_batch = _impl.regressor_batch
rnea_batch = _impl.rnea_batch
rotation_encode = _impl.rotation_encode
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward


def play_hysteresis(Q, width):
    """Play operator state series; scalar width broadcasts to all joints."""
    import numpy as np

    Q = np.ascontiguousarray(Q, dtype=np.float64)
    w = np.ascontiguousarray(np.broadcast_to(width, Q.shape[1]), dtype=np.float64)
    return _impl.play_hysteresis(Q, w)
