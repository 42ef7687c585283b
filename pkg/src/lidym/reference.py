"""Bundled reference arm: a 7-joint serial manipulator of desk-lab scale.

Geometry loosely follows a 1.3 m collaborative arm with alternating
z/y joint axes, all fixed rotations identity, links stacked vertically at
q = 0.  The ground-truth parameter vector is physically consistent
(positive masses, PSD inertia about each CoM) and is what the bundled
plant simulates.  Text-file copies of both live in ``lidym/data`` and are
asserted equal to these builders in the test suite.
"""

from __future__ import annotations

import numpy as np

from .chain import RobotChain
from .dynamics import LinkParamVector

_DEG = np.pi / 180.0

_TRANS = [
    (0.0, 0.0, 0.1575),
    (0.0, 0.0, 0.2025),
    (0.0, 0.0, 0.2045),
    (0.0, 0.0, 0.2155),
    (0.0, 0.0, 0.1845),
    (0.0, 0.0, 0.2155),
    (0.0, 0.0, 0.0810),
]
_AXES = [
    (0.0, 0.0, 1.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    (0.0, -1.0, 0.0),
    (0.0, 0.0, 1.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
]
_POS_LIM_DEG = (170.0, 120.0, 170.0, 120.0, 170.0, 120.0, 175.0)
_VEL_LIM_DEG = (85.0, 85.0, 100.0, 75.0, 130.0, 135.0, 135.0)
_TIP = (0.0, 0.0, 0.126)

_MASS = (6.0, 5.5, 4.5, 4.0, 3.0, 2.5, 1.2)
_COM = [
    (0.005, 0.020, 0.110),
    (0.008, -0.030, 0.120),
    (-0.006, 0.025, 0.115),
    (0.004, -0.020, 0.125),
    (0.003, 0.015, 0.100),
    (-0.002, 0.010, 0.120),
    (0.001, 0.002, 0.050),
]
# principal CoM inertias plus a small product term, all PSD
_INERTIA_DIAG = [
    (0.060, 0.055, 0.018),
    (0.055, 0.050, 0.016),
    (0.040, 0.038, 0.012),
    (0.035, 0.032, 0.010),
    (0.022, 0.020, 0.007),
    (0.016, 0.015, 0.005),
    (0.004, 0.004, 0.002),
]
_INERTIA_XY = (0.003, -0.002, 0.002, -0.0015, 0.001, -0.0008, 0.0002)
_FV = (0.35, 0.30, 0.25, 0.20, 0.15, 0.12, 0.10)
_FC = (0.50, 0.45, 0.40, 0.35, 0.25, 0.20, 0.15)


def reference_chain():
    """The bundled 7-joint chain (see module docstring)."""
    n = 7
    rot = np.tile(np.eye(3), (n, 1, 1))
    lim = np.array(_POS_LIM_DEG) * _DEG
    vel = np.array(_VEL_LIM_DEG) * _DEG
    return RobotChain(rot, _TRANS, _AXES, -lim, lim, vel, tip=_TIP)


def reference_params():
    """Ground-truth LinkParamVector matching :func:`reference_chain`."""
    inertia = []
    for diag, pxy in zip(_INERTIA_DIAG, _INERTIA_XY):
        I = np.diag(diag).astype(np.float64)
        I[0, 1] = I[1, 0] = pxy
        inertia.append(I)
    return LinkParamVector.from_physical(_MASS, _COM, np.array(inertia), _FV, _FC)
