"""Identification excitation trajectories.

Per joint, a finite Fourier series around an offset:

    q_j(t) = off_j + sum_h a_jh sin(2 pi f_jh t + phi_jh)

All frequencies are integer multiples of a common base frequency, so the
trajectory is periodic with the base period and has analytic velocity and
acceleration.  Joints use *disjunct* harmonic sets (a random partition of
the harmonic indices 1..n*H), which decorrelates the joint motions.

``synthesize`` draws a random candidate and rescales each joint's
amplitudes so the swing stays inside the position limits minus a margin
and below a fraction of the velocity limit; a requested amplitude
exceeding a limit ends up touching limit - margin exactly.

``optimize`` minimizes the condition number of the base-reduced stacked
regressor over a fixed evaluation budget: random multi-starts followed by
coordinate descent on offsets, amplitudes and phases.  Deterministic for
a given seed, monotone in the best value; the budget counts
condition-number evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import stack_regressor
from .errors import ContractError, InfeasibilityError, InputDomainError
from .identification import DEFAULT_RANK_TOL, base_reduction

_TWO_PI = 2.0 * np.pi


@dataclass
class FourierTrajectory:
    """Offset plus H (amplitude, frequency, phase) terms per joint."""

    offsets: np.ndarray      # (n,)
    amps: np.ndarray         # (n, H) [rad]
    freqs_hz: np.ndarray     # (n, H)
    phases: np.ndarray       # (n, H)
    base_period: float       # [s]
    duration: float          # [s]

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        self.amps = np.atleast_2d(np.asarray(self.amps, dtype=np.float64))
        self.freqs_hz = np.atleast_2d(np.asarray(self.freqs_hz, dtype=np.float64))
        self.phases = np.atleast_2d(np.asarray(self.phases, dtype=np.float64))
        n, H = self.amps.shape
        if (self.offsets.shape != (n,) or self.phases.shape != (n, H)
                or self.freqs_hz.shape != (n, H)):
            raise ContractError("inconsistent Fourier coefficient shapes")
        if self.duration <= 0.0 or self.base_period <= 0.0:
            raise ContractError("duration and base_period must be positive")

    @property
    def n(self):
        return self.amps.shape[0]

    def sample(self, t):
        """Analytic q, qd, qdd at times t; each (len(t), n)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if not np.all(np.isfinite(t)):
            raise InputDomainError("t: non-finite entries")
        w = _TWO_PI * self.freqs_hz
        arg = w[None, :, :] * t[:, None, None] + self.phases[None, :, :]
        s = np.sin(arg)
        c = np.cos(arg)
        q = self.offsets[None, :] + np.einsum("jh,tjh->tj", self.amps, s)
        qd = np.einsum("jh,tjh->tj", self.amps * w, c)
        qdd = -np.einsum("jh,tjh->tj", self.amps * w * w, s)
        return q, qd, qdd

    def state_grid(self, n_states):
        """Uniform sample over the duration, endpoint excluded."""
        t = np.linspace(0.0, self.duration, n_states, endpoint=False)
        return self.sample(t)


def _rescale(chain, traj, margin, vel_fraction, grid=2000):
    """Scale each joint's amplitudes into the limits; returns a new traj.

    The per-joint scale is min(1, position room / swing, velocity
    allowance / peak velocity), evaluated on a dense one-period grid.
    """
    t = np.linspace(0.0, traj.base_period, grid, endpoint=False)
    q, qd, _ = traj.sample(t)
    dev = np.max(np.abs(q - traj.offsets[None, :]), axis=0)
    vel = np.max(np.abs(qd), axis=0)
    room = np.minimum(traj.offsets - chain.pos_lower,
                      chain.pos_upper - traj.offsets) - margin
    if np.any(room <= 0.0):
        raise InfeasibilityError("offset leaves no room inside the position limits")
    s_pos = np.where(dev > 0.0, room / np.where(dev > 0.0, dev, 1.0), np.inf)
    s_vel = np.where(vel > 0.0,
                     vel_fraction * chain.vel_limit / np.where(vel > 0.0, vel, 1.0),
                     np.inf)
    scale = np.minimum(1.0, np.minimum(s_pos, s_vel))
    return FourierTrajectory(offsets=traj.offsets, amps=traj.amps * scale[:, None],
                             freqs_hz=traj.freqs_hz, phases=traj.phases,
                             base_period=traj.base_period, duration=traj.duration)


def check_feasible(chain, traj, margin=0.0, grid=2000, tol=1e-6):
    """Raise InfeasibilityError if the dense-grid swing violates a limit."""
    t = np.linspace(0.0, traj.base_period, grid, endpoint=False)
    q, qd, _ = traj.sample(t)
    if np.any(q < chain.pos_lower[None, :] + margin - tol) \
            or np.any(q > chain.pos_upper[None, :] - margin + tol):
        raise InfeasibilityError("trajectory leaves the position limits")
    if np.any(np.abs(qd) > chain.vel_limit[None, :] + tol):
        raise InfeasibilityError("trajectory exceeds a velocity limit")


def synthesize(chain, seed, harmonics=5, base_freq_hz=0.1, duration=None,
               margin=0.05, vel_fraction=0.9, offset_span=0.2, amp_request=None):
    """Random feasible excitation trajectory, deterministic in ``seed``.

    Harmonic indices 1..n*H are randomly partitioned among the joints
    (sorted within each joint), so no two joints share a frequency.
    ``amp_request`` optionally fixes the raw amplitudes before limit
    rescaling (used by the rescaling contract test).
    """
    if harmonics < 1:
        raise ContractError("harmonics must be >= 1")
    if base_freq_hz <= 0.0:
        raise ContractError("base_freq_hz must be positive")
    rng = np.random.default_rng(seed)
    n = chain.n
    half = 0.5 * (chain.pos_upper - chain.pos_lower)
    center = 0.5 * (chain.pos_upper + chain.pos_lower)
    offsets = center + rng.uniform(-offset_span, offset_span, n) * half
    pool = rng.permutation(np.arange(1, n * harmonics + 1))
    idx = np.sort(pool.reshape(n, harmonics), axis=1)
    freqs = idx * base_freq_hz
    if amp_request is None:
        raw = rng.uniform(0.3, 1.0, (n, harmonics)) * half[:, None] / idx
    else:
        raw = np.broadcast_to(np.asarray(amp_request, dtype=np.float64),
                              (n, harmonics)).copy()
    phases = rng.uniform(0.0, _TWO_PI, (n, harmonics))
    period = 1.0 / base_freq_hz
    traj = FourierTrajectory(offsets=offsets, amps=raw, freqs_hz=freqs,
                             phases=phases, base_period=period,
                             duration=period if duration is None else duration)
    traj = _rescale(chain, traj, margin, vel_fraction)
    check_feasible(chain, traj, margin=0.0)
    return traj


def condition_number(chain, traj, n_states=200, rank_tol=DEFAULT_RANK_TOL):
    """Condition number of the base-reduced stacked regressor on a state grid."""
    if n_states < 200:
        raise ContractError("n_states must be >= 200")
    q, qd, qdd = traj.state_grid(n_states)
    Kbar = stack_regressor(chain, q, qd, qdd)
    red = base_reduction(Kbar, rank_tol=rank_tol)
    if red.rank == 0:
        return np.inf
    return float(np.linalg.cond(red.reduce_matrix(Kbar)))


@dataclass
class OptimizeResult:
    trajectory: FourierTrajectory
    cond: float
    evaluations: int
    history: list


def optimize(chain, budget, seed=0, harmonics=5, base_freq_hz=0.1,
             n_states=200, rank_tol=DEFAULT_RANK_TOL, margin=0.05,
             vel_fraction=0.9, start_fraction=0.3):
    """Minimize the excitation condition number within an evaluation budget.

    Phase 1 draws ``ceil(start_fraction * budget)`` random candidates
    (candidate 0 is ``synthesize(chain, seed)`` itself, so budget 1
    returns the seed trajectory and its condition number unchanged).
    Phase 2 runs coordinate descent from the best start: additive offset
    steps, multiplicative amplitude steps and additive phase steps per
    coordinate, rescaled back into the limits, accepted only on strict
    improvement, steps halved after a sweep without progress.
    """
    if budget < 1:
        raise ContractError("budget must be >= 1")
    evals = 0
    history = []
    best_traj = None
    best_cond = np.inf

    def measure(traj):
        nonlocal evals
        evals += 1
        c = condition_number(chain, traj, n_states=n_states, rank_tol=rank_tol)
        history.append(min(best_cond, c))
        return c

    n_starts = max(1, min(budget, int(np.ceil(start_fraction * budget))))
    for k in range(n_starts):
        traj = synthesize(chain, seed + k, harmonics=harmonics,
                          base_freq_hz=base_freq_hz, margin=margin,
                          vel_fraction=vel_fraction)
        c = measure(traj)
        if c < best_cond:
            best_traj, best_cond = traj, c
        if evals >= budget:
            return OptimizeResult(best_traj, best_cond, evals, history)

    half = 0.5 * (chain.pos_upper - chain.pos_lower)
    n, H = best_traj.amps.shape
    moves = [("off", j, 0, sgn) for j in range(n) for sgn in (1.0, -1.0)]
    moves += [(kind, j, h, sgn)
              for j in range(n) for h in range(H)
              for kind in ("amp", "phase") for sgn in (1.0, -1.0)]
    amp_step, ph_step, off_step = 0.35, 0.5, 0.1
    while evals < budget and amp_step > 1e-4:
        improved = False
        for kind, j, h, sgn in moves:
            if evals >= budget:
                break
            offsets = best_traj.offsets.copy()
            amps = best_traj.amps.copy()
            phases = best_traj.phases.copy()
            if kind == "off":
                offsets[j] += sgn * off_step * half[j]
            elif kind == "amp":
                amps[j, h] *= 1.0 + sgn * amp_step
            else:
                phases[j, h] += sgn * ph_step
            cand = FourierTrajectory(offsets=offsets, amps=amps,
                                     freqs_hz=best_traj.freqs_hz, phases=phases,
                                     base_period=best_traj.base_period,
                                     duration=best_traj.duration)
            try:
                cand = _rescale(chain, cand, margin, vel_fraction)
            except InfeasibilityError:
                continue
            c = measure(cand)
            if c < best_cond:
                best_traj, best_cond = cand, c
                improved = True
        if not improved:
            amp_step *= 0.5
            ph_step *= 0.5
            off_step *= 0.5
    return OptimizeResult(best_traj, best_cond, evals, history)
