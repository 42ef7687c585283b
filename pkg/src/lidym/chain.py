"""Serial kinematic chain description and forward kinematics.

A chain with ``n`` revolute joints is a list of links.  Link ``i`` is
attached to link ``i-1`` (link 0 to the fixed base) through a constant
transform, given as a fixed rotation ``rot[i]`` and a translation
``trans[i]`` expressed in the parent frame, followed by a rotation of
``q[i]`` about the unit axis ``axes[i]`` of the new frame.  All link-local
quantities (axis, center of mass, inertia) are expressed in that joint
frame.  An optional tool point ``tip`` is a translation in the last link's
frame; it defines the end-effector position used by workspace predicates.

Gravity is a 3-vector in the base frame (default ``(0, 0, -9.81)``).
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, InputDomainError

_UNIT_TOL = 1e-10


def _as_float_array(x, shape, name):
    a = np.asarray(x, dtype=np.float64)
    if a.shape != shape:
        raise ContractError(f"{name}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputDomainError(f"{name}: non-finite entries")
    return a


def rotation_about_axis(axis, angle):
    """Rodrigues rotation matrix (or a batch of them) about a unit axis.

    ``angle`` may be a scalar or a 1-d array; the result has shape
    ``(3, 3)`` or ``(len(angle), 3, 3)``.
    """
    u = np.asarray(axis, dtype=np.float64)
    th = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(th), np.sin(th)
    ux, uy, uz = u
    skew = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    outer = np.outer(u, u)
    eye = np.eye(3)
    if th.ndim == 0:
        return c * eye + s * skew + (1.0 - c) * outer
    c = c[:, None, None]
    s = s[:, None, None]
    return c * eye + s * skew + (1.0 - c) * outer


class RobotChain:
    """Immutable description of a serial revolute chain.

    Parameters
    ----------
    rot : (n, 3, 3) array
        Fixed rotation from parent frame to joint frame at ``q = 0``.
    trans : (n, 3) array
        Fixed translation from parent origin to joint origin, in the
        parent frame.
    axes : (n, 3) array
        Unit rotation axes in the joint frame.
    pos_lower, pos_upper : (n,) arrays
        Joint position limits [rad], ``lower < upper``.
    vel_limit : (n,) array
        Symmetric joint velocity limits [rad/s], strictly positive.
    gravity : (3,) array
        Gravity vector in the base frame.
    tip : (3,) array
        Tool point in the last joint frame.
    """

    def __init__(self, rot, trans, axes, pos_lower, pos_upper, vel_limit,
                 gravity=(0.0, 0.0, -9.81), tip=(0.0, 0.0, 0.0)):
        rot = np.asarray(rot, dtype=np.float64)
        if rot.ndim != 3 or rot.shape[1:] != (3, 3) or rot.shape[0] < 1:
            raise ContractError(f"rot: expected (n, 3, 3), got {rot.shape}")
        n = rot.shape[0]
        self.rot = rot
        self.trans = _as_float_array(trans, (n, 3), "trans")
        self.axes = _as_float_array(axes, (n, 3), "axes")
        self.pos_lower = _as_float_array(pos_lower, (n,), "pos_lower")
        self.pos_upper = _as_float_array(pos_upper, (n,), "pos_upper")
        self.vel_limit = _as_float_array(vel_limit, (n,), "vel_limit")
        self.gravity = _as_float_array(gravity, (3,), "gravity")
        self.tip = _as_float_array(tip, (3,), "tip")
        if not np.all(np.isfinite(rot)):
            raise InputDomainError("rot: non-finite entries")

        norms = np.linalg.norm(self.axes, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ContractError("axes must be unit vectors")
        for i in range(n):
            R = self.rot[i]
            if not np.allclose(R @ R.T, np.eye(3), atol=1e-9):
                raise ContractError(f"rot[{i}] is not orthonormal")
        if np.any(self.pos_lower >= self.pos_upper):
            raise ContractError("position limits must satisfy lower < upper")
        if np.any(self.vel_limit <= 0.0):
            raise ContractError("velocity limits must be positive")

        for a in (self.rot, self.trans, self.axes, self.pos_lower,
                  self.pos_upper, self.vel_limit, self.gravity, self.tip):
            a.setflags(write=False)

    @property
    def n(self):
        return self.rot.shape[0]

    def check_q(self, q):
        q = np.asarray(q, dtype=np.float64)
        if q.shape[-1] != self.n:
            raise ContractError(f"q: expected last dim {self.n}, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise InputDomainError("q: non-finite entries")
        return q

    def inside_limits(self, q, margin=0.0):
        """Boolean mask: configurations within the position limits."""
        q = self.check_q(q)
        lo = self.pos_lower + margin
        hi = self.pos_upper - margin
        return np.all((q >= lo) & (q <= hi), axis=-1)


def fk_batch(chain, Q):
    """Forward kinematics for a batch of configurations.

    Parameters
    ----------
    chain : RobotChain
    Q : (N, n) array of joint positions.

    Returns
    -------
    R : (N, n, 3, 3)
        Joint-frame orientations in the base frame.
    O : (N, n, 3)
        Joint-frame origins in the base frame.
    ee : (N, 3)
        Tool-point positions.
    """
    Q = chain.check_q(np.atleast_2d(Q))
    N, n = Q.shape
    R = np.empty((N, n, 3, 3))
    O = np.empty((N, n, 3))
    Rb = np.broadcast_to(np.eye(3), (N, 3, 3))
    ob = np.zeros((N, 3))
    for i in range(n):
        Rpre = Rb @ chain.rot[i]
        O[:, i] = ob + np.einsum("nij,j->ni", Rb, chain.trans[i])
        R[:, i] = Rpre @ rotation_about_axis(chain.axes[i], Q[:, i])
        Rb = R[:, i]
        ob = O[:, i]
    ee = ob + np.einsum("nij,j->ni", Rb, chain.tip)
    return R, O, ee


def forward_kinematics(chain, q):
    """Frames and tool point for a single configuration.

    Returns ``(R, O, ee)`` with shapes ``(n, 3, 3)``, ``(n, 3)``, ``(3,)``.
    """
    R, O, ee = fk_batch(chain, np.asarray(q, dtype=np.float64)[None, :])
    return R[0], O[0], ee[0]
