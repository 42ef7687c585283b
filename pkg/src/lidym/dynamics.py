"""Inverse dynamics: Newton-Euler torques and the linear torque regressor.

Both routes compute joint torques for a revolute serial chain.  ``rnea``
evaluates the recursive Newton-Euler algorithm directly for one parameter
vector; ``regressor`` assembles the matrix K(q, qd, qdd) with
``tau = K @ phi`` for every ``phi``.  The two are implemented independently
and are kept as a mutual consistency check.

Parameter layout per link (12 entries, inertia about the link frame
origin, expressed in the link frame):

    [m, m*cx, m*cy, m*cz, Ixx, Ixy, Ixz, Iyy, Iyz, Izz, Fv, Fc]

``Fv`` and ``Fc`` are viscous and Coulomb friction coefficients acting on
the joint velocity: ``tau_fric = Fv*qd + Fc*sign(qd)`` with sign(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError, InputDomainError

PARAMS_PER_LINK = 12
PARAM_NAMES = ("m", "mcx", "mcy", "mcz", "Ixx", "Ixy", "Ixz", "Iyy",
               "Iyz", "Izz", "Fv", "Fc")


@dataclass(frozen=True)
class JointState:
    """Joint positions, velocities and accelerations at one instant."""

    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray

    def __post_init__(self):
        for name in ("q", "qd", "qdd"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if a.ndim != 1:
                raise ContractError(f"{name} must be 1-d")
            if not np.all(np.isfinite(a)):
                raise InputDomainError(f"{name}: non-finite entries")
            object.__setattr__(self, name, a)
        if not (self.q.shape == self.qd.shape == self.qdd.shape):
            raise ContractError("q, qd, qdd must have equal length")


class LinkParamVector:
    """Stacked per-link inertial and friction parameters, shape (n, 12)."""

    def __init__(self, per_link):
        a = np.ascontiguousarray(per_link, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != PARAMS_PER_LINK:
            raise ContractError(f"per_link: expected (n, 12), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InputDomainError("per_link: non-finite entries")
        a.setflags(write=False)
        self.per_link = a

    @classmethod
    def from_flat(cls, flat, n):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (PARAMS_PER_LINK * n,):
            raise ContractError(f"flat: expected ({PARAMS_PER_LINK * n},), got {flat.shape}")
        return cls(flat.reshape(n, PARAMS_PER_LINK))

    @classmethod
    def from_physical(cls, mass, com, inertia_com, fv, fc):
        """Build from masses, CoM offsets and CoM-frame inertia tensors.

        ``inertia_com`` is (n, 3, 3); the stored inertia is translated to
        the link-frame origin with the parallel-axis theorem.
        """
        mass = np.asarray(mass, dtype=np.float64)
        com = np.asarray(com, dtype=np.float64)
        inertia_com = np.asarray(inertia_com, dtype=np.float64)
        fv = np.asarray(fv, dtype=np.float64)
        fc = np.asarray(fc, dtype=np.float64)
        n = mass.shape[0]
        out = np.empty((n, PARAMS_PER_LINK))
        for i in range(n):
            c = com[i]
            Io = inertia_com[i] + mass[i] * (np.dot(c, c) * np.eye(3) - np.outer(c, c))
            out[i, 0] = mass[i]
            out[i, 1:4] = mass[i] * c
            out[i, 4:10] = [Io[0, 0], Io[0, 1], Io[0, 2], Io[1, 1], Io[1, 2], Io[2, 2]]
            out[i, 10] = fv[i]
            out[i, 11] = fc[i]
        return cls(out)

    @property
    def n(self):
        return self.per_link.shape[0]

    @property
    def flat(self):
        return self.per_link.reshape(-1)

    @property
    def mass(self):
        return self.per_link[:, 0]

    @property
    def first_moment(self):
        return self.per_link[:, 1:4]

    @property
    def fv(self):
        return self.per_link[:, 10]

    @property
    def fc(self):
        return self.per_link[:, 11]

    def inertia_origin(self, i):
        v = self.per_link[i, 4:10]
        return np.array([[v[0], v[1], v[2]],
                         [v[1], v[3], v[4]],
                         [v[2], v[4], v[5]]])

    def is_physical(self, tol=1e-12):
        """True if masses are positive and CoM-frame inertias are PSD."""
        if np.any(self.mass <= 0.0):
            return False
        for i in range(self.n):
            m = self.per_link[i, 0]
            c = self.per_link[i, 1:4] / m
            Ic = self.inertia_origin(i) - m * (np.dot(c, c) * np.eye(3) - np.outer(c, c))
            if np.any(np.linalg.eigvalsh(Ic) < -tol):
                return False
        return True


def _coerce_phi(phi, n):
    if isinstance(phi, LinkParamVector):
        if phi.n != n:
            raise ContractError(f"phi has {phi.n} links, chain has {n}")
        return phi.per_link
    a = np.ascontiguousarray(phi, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(n, PARAMS_PER_LINK)
    if a.shape != (n, PARAMS_PER_LINK):
        raise ContractError(f"phi: expected ({n}, 12) or ({12 * n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputDomainError("phi: non-finite entries")
    return a


def _coerce_batch(chain, Q, Qd, Qdd):
    Q = np.ascontiguousarray(np.atleast_2d(Q), dtype=np.float64)
    Qd = np.ascontiguousarray(np.atleast_2d(Qd), dtype=np.float64)
    Qdd = np.ascontiguousarray(np.atleast_2d(Qdd), dtype=np.float64)
    if not (Q.shape == Qd.shape == Qdd.shape):
        raise ContractError("Q, Qd, Qdd must have equal shapes")
    if Q.shape[1] != chain.n:
        raise ContractError(f"state width {Q.shape[1]} != chain.n {chain.n}")
    for name, a in (("Q", Q), ("Qd", Qd), ("Qdd", Qdd)):
        if not np.all(np.isfinite(a)):
            raise InputDomainError(f"{name}: non-finite entries")
    return Q, Qd, Qdd


def rnea_batch(chain, phi, Q, Qd, Qdd):
    """Newton-Euler torques for a batch of states, shape (N, n)."""
    Q, Qd, Qdd = _coerce_batch(chain, Q, Qd, Qdd)
    p = _coerce_phi(phi, chain.n)
    return kernels.rnea_batch(chain.rot, chain.trans, chain.axes,
                              chain.gravity, p, Q, Qd, Qdd)


def rnea(chain, phi, state):
    """Newton-Euler torques for a single JointState, shape (n,)."""
    return rnea_batch(chain, phi, state.q[None], state.qd[None], state.qdd[None])[0]


def regressor_batch(chain, Q, Qd, Qdd):
    """Torque regressor for a batch of states, shape (N, n, 12n)."""
    Q, Qd, Qdd = _coerce_batch(chain, Q, Qd, Qdd)
    return kernels.regressor_batch(chain.rot, chain.trans, chain.axes,
                                   chain.gravity, Q, Qd, Qdd)


def regressor(chain, state):
    """Torque regressor for a single JointState, shape (n, 12n)."""
    return regressor_batch(chain, state.q[None], state.qd[None], state.qdd[None])[0]


def stack_regressor(chain, Q, Qd, Qdd):
    """Row-stacked regressor over N states, shape (N*n, 12n)."""
    K = regressor_batch(chain, Q, Qd, Qdd)
    return K.reshape(-1, PARAMS_PER_LINK * chain.n)
