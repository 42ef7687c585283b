"""Rigid-body parameter identification from joint observations.

The measured torque of an N-sample recording is linear in the 12n link
parameters: stacking the per-state regressor gives ``tau_bar = Kbar @ phi``
with ``Kbar`` of shape (N*n, 12n).  ``Kbar`` is rank deficient for any
serial chain, so a column-pivoted QR factorization selects an independent
column subset (the base parameters) together with the linear map that
folds the dependent columns into them.  Ordinary least squares on the
reduced matrix then yields the base parameter vector.

Raw recordings are preprocessed before stacking: zero-phase Butterworth
filtering of positions and torques, central-difference velocities and
accelerations, and a 2-sample trim at each boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.signal

from .dynamics import PARAMS_PER_LINK, regressor_batch, stack_regressor
from .errors import ContractError, InputDomainError

DEFAULT_CUTOFF_HZ = 5.0
DEFAULT_FILTER_ORDER = 2
DEFAULT_RANK_TOL = 1e-8
_TRIM = 2


@dataclass
class ObservationSet:
    """Raw fixed-rate recording of joint positions and torques."""

    t: np.ndarray
    q: np.ndarray
    tau: np.ndarray
    rate: float

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        self.tau = np.asarray(self.tau, dtype=np.float64)
        if self.q.ndim != 2 or self.q.shape != self.tau.shape:
            raise ContractError("q and tau must both be (N, n)")
        if self.t.shape != (self.q.shape[0],):
            raise ContractError("t must be (N,)")
        if self.rate <= 0.0:
            raise ContractError("rate must be positive")
        for name, a in (("t", self.t), ("q", self.q), ("tau", self.tau)):
            if not np.all(np.isfinite(a)):
                raise InputDomainError(f"{name}: non-finite entries")

    @property
    def n(self):
        return self.q.shape[1]


@dataclass
class ProcessedObservations:
    """Filtered, differentiated and boundary-trimmed observations."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    tau: np.ndarray
    rate: float


def preprocess(obs, cutoff_hz=DEFAULT_CUTOFF_HZ, order=DEFAULT_FILTER_ORDER):
    """Zero-phase filter + central differences + 2-sample boundary trim.

    Positions and torques are filtered forward-backward with a Butterworth
    low-pass (default 2nd order, 5 Hz cutoff); velocities and accelerations
    come from central differences of the filtered positions.
    """
    if cutoff_hz <= 0.0 or cutoff_hz >= obs.rate / 2.0:
        raise ContractError("cutoff must lie in (0, rate/2)")
    b, a = scipy.signal.butter(order, cutoff_hz / (obs.rate / 2.0))
    padlen = 3 * max(len(a), len(b))
    N = obs.q.shape[0]
    if N <= max(padlen, 2 * _TRIM):
        raise InputDomainError(f"recording too short to preprocess ({N} samples)")
    qf = scipy.signal.filtfilt(b, a, obs.q, axis=0)
    tf = scipy.signal.filtfilt(b, a, obs.tau, axis=0)
    dt = 1.0 / obs.rate
    qd = np.empty_like(qf)
    qdd = np.empty_like(qf)
    qd[1:-1] = (qf[2:] - qf[:-2]) / (2.0 * dt)
    qdd[1:-1] = (qf[2:] - 2.0 * qf[1:-1] + qf[:-2]) / (dt * dt)
    qd[0] = qd[1]
    qd[-1] = qd[-2]
    qdd[0] = qdd[1]
    qdd[-1] = qdd[-2]
    sl = slice(_TRIM, N - _TRIM)
    return ProcessedObservations(t=obs.t[sl].copy(), q=qf[sl], qd=qd[sl],
                                 qdd=qdd[sl], tau=tf[sl], rate=obs.rate)


@dataclass
class BaseReduction:
    """Base-parameter column selection and dependency map.

    ``selected`` holds the independent column indices of the stacked
    regressor in QR pivot order; ``dependent`` the rest.  ``combination``
    is the (b, d) map M with phi_b = M @ phi_full, i.e. identity on the
    selected columns and the folded coefficients W = R11^-1 R12 on the
    dependent ones: Kbar @ phi == Kbar[:, selected] @ (M @ phi) for every
    phi, up to factorization roundoff.
    """

    selected: np.ndarray
    dependent: np.ndarray
    combination: np.ndarray
    rank_tol: float
    r_diag: np.ndarray = field(repr=False)

    @property
    def rank(self):
        return len(self.selected)

    @property
    def total(self):
        return self.combination.shape[1]

    def reduce_params(self, phi_full):
        phi_full = np.asarray(phi_full, dtype=np.float64).reshape(-1)
        if phi_full.shape[0] != self.total:
            raise ContractError(f"phi_full must have {self.total} entries")
        return self.combination @ phi_full

    def reduce_matrix(self, Kbar):
        return np.ascontiguousarray(Kbar[:, self.selected])


def base_reduction(Kbar, rank_tol=DEFAULT_RANK_TOL):
    """Column-pivoted QR base-parameter reduction of a stacked regressor.

    Numerical rank b counts diagonal entries with
    ``|R_ii| > rank_tol * |R_00|``.  An all-zero matrix yields rank 0 and
    an empty (but valid) map.
    """
    Kbar = np.asarray(Kbar, dtype=np.float64)
    if Kbar.ndim != 2:
        raise ContractError("Kbar must be 2-d")
    if not np.all(np.isfinite(Kbar)):
        raise InputDomainError("Kbar: non-finite entries")
    d = Kbar.shape[1]
    R, piv = scipy.linalg.qr(Kbar, mode="r", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        b = 0
    else:
        b = int(np.sum(diag > rank_tol * diag[0]))
    selected = piv[:b].copy()
    dependent = piv[b:].copy()
    M = np.zeros((b, d))
    if b > 0:
        M[np.arange(b), selected] = 1.0
        if dependent.size:
            W = scipy.linalg.solve_triangular(R[:b, :b], R[:b, b:])
            M[:, dependent] = W
    return BaseReduction(selected=selected, dependent=dependent, combination=M,
                         rank_tol=float(rank_tol), r_diag=np.diag(R)[:min(b + 1, d)].copy())


class IdentifiedRBDModel:
    """Chain + base reduction + identified base parameters."""

    def __init__(self, chain, reduction, phi_base, diagnostics=None):
        phi_base = np.asarray(phi_base, dtype=np.float64).reshape(-1)
        if phi_base.shape[0] != reduction.rank:
            raise ContractError("phi_base length must equal reduction rank")
        if reduction.total != PARAMS_PER_LINK * chain.n:
            raise ContractError("reduction width does not match the chain")
        self.chain = chain
        self.reduction = reduction
        self.phi_base = phi_base
        self.diagnostics = dict(diagnostics or {})

    def predict_batch(self, Q, Qd, Qdd):
        """Predicted joint torques, shape (N, n)."""
        K = regressor_batch(self.chain, Q, Qd, Qdd)
        return K[:, :, self.reduction.selected] @ self.phi_base

    def predict(self, state):
        return self.predict_batch(state.q[None], state.qd[None], state.qdd[None])[0]


def identify(K_reduced, tau_stacked):
    """Least-squares base parameters from a reduced stacked regressor.

    Requires at least as many rows as columns and full column rank.
    Returns ``(phi_base, residual_rms)``.
    """
    K_reduced = np.asarray(K_reduced, dtype=np.float64)
    tau_stacked = np.asarray(tau_stacked, dtype=np.float64).reshape(-1)
    if K_reduced.ndim != 2 or K_reduced.shape[0] != tau_stacked.shape[0]:
        raise ContractError("K_reduced rows must match tau length")
    if K_reduced.shape[0] < K_reduced.shape[1]:
        raise ContractError("underdetermined system: need rows >= columns")
    if not (np.all(np.isfinite(K_reduced)) and np.all(np.isfinite(tau_stacked))):
        raise InputDomainError("non-finite entries")
    phi, _, rank, _ = np.linalg.lstsq(K_reduced, tau_stacked, rcond=None)
    if rank < K_reduced.shape[1]:
        raise ContractError("reduced regressor is column rank deficient")
    resid = K_reduced @ phi - tau_stacked
    return phi, float(np.sqrt(np.mean(resid ** 2)))


def identify_from_observations(chain, processed, rank_tol=DEFAULT_RANK_TOL):
    """Full pipeline: stack, reduce, solve.  Returns an IdentifiedRBDModel."""
    Kbar = stack_regressor(chain, processed.q, processed.qd, processed.qdd)
    tau_bar = processed.tau.reshape(-1)
    red = base_reduction(Kbar, rank_tol=rank_tol)
    Kb = red.reduce_matrix(Kbar)
    phi_b, rms = identify(Kb, tau_bar)
    resid = (Kb @ phi_b - tau_bar).reshape(-1, chain.n)
    diags = {
        "residual_rms": rms,
        "residual_mse_per_joint": np.mean(resid ** 2, axis=0),
        "cond": float(np.linalg.cond(Kb)),
        "rank": red.rank,
        "samples": processed.q.shape[0],
    }
    return IdentifiedRBDModel(chain, red, phi_b, diags)
