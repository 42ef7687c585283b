"""lidym: inverse dynamics identification and hybrid neural torque models
for serial revolute manipulators.

Pipeline overview: excite and identify a rigid-body base model, generate a
low-velocity dataset against a hysteretic plant, encode rotation history,
train hybrid model-plus-network predictors, and evaluate per-joint torque
MSE.  See the README for the CLI walkthrough.
"""

import os as _os

if _os.environ.get("LIDYM_THREADS"):
    # cap the BLAS pools before numpy first loads; explicit user
    # settings win over the package-level cap
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["LIDYM_THREADS"])

from .chain import RobotChain, forward_kinematics
from .dynamics import JointState, LinkParamVector, regressor, rnea
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "RobotChain",
    "forward_kinematics",
    "JointState",
    "LinkParamVector",
    "regressor",
    "rnea",
    "BACKEND",
    "__version__",
]
