"""Rotation-history encoding.

The channel ``r`` summarizes gearbox loading history: per joint, the
signed rotation accumulated since the last direction reversal, hard
clamped to +-10 degrees.  Position steps with magnitude at or below a
deadband (default 1e-5 rad) are ignored entirely: they move neither the
reference position nor r, so sensor jitter cannot fake reversals.

State per joint is (anchor, direction, previous accepted position).  The
anchor starts at the first sample (r = 0, direction unset) and resets to
the pre-reversal position whenever the step direction flips.  After each
accepted step, r = clamp(position - anchor).

``encode_batch`` runs the whole series through the active kernel backend;
``RotationEncoder`` is the streaming equivalent.  The two are bit-identical
on the same series.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ContractError, InputDomainError

CLAMP_RAD = float(np.deg2rad(10.0))
DEADBAND_RAD = 1e-5


def encode_batch(Q, deadband=DEADBAND_RAD, clamp=CLAMP_RAD):
    """Encode a position series Q (T, n) -> r (T, n)."""
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    if Q.ndim != 2:
        raise ContractError(f"Q must be (T, n), got {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise InputDomainError("Q: non-finite entries")
    if deadband < 0.0 or clamp <= 0.0:
        raise ContractError("deadband must be >= 0 and clamp > 0")
    return kernels.rotation_encode(Q, float(deadband), float(clamp))


class RotationEncoder:
    """Streaming rotation-history encoder for n joints.

    ``update(q)`` consumes one position sample and returns the encoded
    row.  ``reset()`` clears the state; the next update re-initializes
    from its sample (returning zeros), exactly like the first row of
    :func:`encode_batch`.
    """

    def __init__(self, n, deadband=DEADBAND_RAD, clamp=CLAMP_RAD):
        if n < 1:
            raise ContractError("n must be >= 1")
        if deadband < 0.0 or clamp <= 0.0:
            raise ContractError("deadband must be >= 0 and clamp > 0")
        self.n = int(n)
        self.deadband = float(deadband)
        self.clamp = float(clamp)
        self.reset()

    def reset(self):
        self._anchor = None
        self._prev = None
        self._direc = None

    def update(self, q):
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.n,):
            raise ContractError(f"q must be ({self.n},), got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise InputDomainError("q: non-finite entries")
        if self._prev is None:
            self._anchor = q.copy()
            self._prev = q.copy()
            self._direc = np.zeros(self.n)
            return np.zeros(self.n)
        r = np.empty(self.n)
        for j in range(self.n):
            delta = q[j] - self._prev[j]
            if abs(delta) > self.deadband:
                sd = 1.0 if delta > 0.0 else -1.0
                if self._direc[j] != 0.0 and sd != self._direc[j]:
                    self._anchor[j] = self._prev[j]
                self._direc[j] = sd
                self._prev[j] = q[j]
            rj = self._prev[j] - self._anchor[j]
            if rj > self.clamp:
                rj = self.clamp
            elif rj < -self.clamp:
                rj = -self.clamp
            r[j] = rj
        return r
