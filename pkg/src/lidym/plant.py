"""Synthetic test plant: kinematic replay plus invented torque physics.

The plant never integrates dynamics.  Waypoint paths are turned into
smooth position trajectories (trapezoidal speed profiles, resampled at a
fixed rate) and torques are synthesized on top of the rigid-body model:

    tau = rnea(phi_true) + hysteresis + Stribeck excess + ripple + noise

The hysteresis term is a play (backlash) operator feeding a tanh
stiffness, which produces the torque-angle loops and reversal
deflections a gearbox shows.  All stochastic terms are seeded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import rnea_batch
from .errors import ContractError
from .limopa import SCAF

DEFAULT_RATE_HZ = 100.0
DEFAULT_ACCEL_TIME_S = 0.05


@dataclass
class PlantModel:
    """Chain, true parameters and the invented torque phenomenology."""

    chain: object
    phi_true: object
    play_width: np.ndarray        # [rad]
    k_h: np.ndarray               # [Nm]
    alpha: np.ndarray             # tanh shaping [1/rad]
    f_static: np.ndarray          # Stribeck static level [Nm]
    v_stribeck: np.ndarray        # [rad/s]
    ripple_amp: np.ndarray        # [Nm]
    ripple_freq: np.ndarray       # spatial [1/rad]
    sigma_tau: float = 0.02
    sigma_q: float = 1e-5
    rate: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        n = self.chain.n
        for name in ("play_width", "k_h", "alpha", "f_static", "v_stribeck",
                     "ripple_amp", "ripple_freq"):
            arr = np.ascontiguousarray(
                np.broadcast_to(getattr(self, name), n), dtype=np.float64)
            setattr(self, name, arr)
        if np.any(self.play_width < 0.0) or np.any(self.k_h < 0.0):
            raise ContractError("play width and hysteresis stiffness must be >= 0")
        if np.any(self.v_stribeck <= 0.0):
            raise ContractError("Stribeck velocity must be positive")
        if self.sigma_tau < 0.0 or self.sigma_q < 0.0 or self.rate <= 0.0:
            raise ContractError("noise levels must be >= 0 and rate > 0")

    def digest(self):
        """Short stable hash of every plant constant, for file metadata."""
        import hashlib
        h = hashlib.sha256()
        for name in ("play_width", "k_h", "alpha", "f_static", "v_stribeck",
                     "ripple_amp", "ripple_freq"):
            h.update(getattr(self, name).tobytes())
        h.update(np.array([self.sigma_tau, self.sigma_q, self.rate]).tobytes())
        h.update(self.phi_true.flat.tobytes())
        return h.hexdigest()[:12]


def default_plant(chain, phi_true, rate=DEFAULT_RATE_HZ, sigma_tau=0.02,
                  sigma_q=1e-5):
    """Plant constants sized so hysteresis sits well above the noise floor."""
    fc = phi_true.fc
    return PlantModel(chain=chain, phi_true=phi_true,
                      play_width=np.deg2rad(0.5), k_h=2.0, alpha=10.0,
                      f_static=1.5 * fc, v_stribeck=0.05, ripple_amp=0.05,
                      ripple_freq=30.0, sigma_tau=sigma_tau, sigma_q=sigma_q,
                      rate=rate)


@dataclass
class KinematicTrajectory:
    """Uniform-rate (t, q, qd, qdd) with per-sample phase annotations.

    qd and qdd are central differences of q (one-sided at the ends), so
    stored derivatives and stored positions stay mutually consistent.
    """

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    phase: np.ndarray
    rate: float

    def __len__(self):
        return self.t.shape[0]


def _difference_derivatives(q, rate):
    qd = np.empty_like(q)
    qdd = np.empty_like(q)
    dt = 1.0 / rate
    qd[1:-1] = (q[2:] - q[:-2]) / (2.0 * dt)
    qd[0] = (q[1] - q[0]) / dt
    qd[-1] = (q[-1] - q[-2]) / dt
    qdd[1:-1] = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / (dt * dt)
    qdd[0] = qdd[1]
    qdd[-1] = qdd[-2]
    return qd, qdd


def time_parameterize(path, chain, rate=DEFAULT_RATE_HZ,
                      accel_time=DEFAULT_ACCEL_TIME_S):
    """Trapezoidal speed profiles through the waypoints, resampled.

    Each segment runs the normalized path coordinate 0 -> 1 with ramp
    time ``accel_time`` and peak rate set so the binding joint moves at
    speed_factor x its velocity limit; short segments fall back to a
    triangular profile.  End velocities are zero, so joins are smooth.
    """
    W = np.asarray(path.waypoints, dtype=np.float64)
    if W.shape[0] < 2:
        raise ContractError("path must contain at least two waypoints")
    if rate <= 0.0 or accel_time <= 0.0:
        raise ContractError("rate and accel_time must be positive")
    deltas = np.diff(W, axis=0)
    keep = np.flatnonzero(np.max(np.abs(deltas), axis=1) > 0.0)
    if keep.size == 0:
        raise ContractError("path has no motion")

    seg_from = W[keep]
    seg_delta = deltas[keep]
    seg_speed = np.asarray(path.speed)[keep + 1]
    seg_phase = np.asarray(path.phase, dtype=object)[keep + 1]

    with np.errstate(divide="ignore"):
        per_joint = np.where(seg_delta != 0.0,
                             chain.vel_limit[None, :] / np.abs(seg_delta), np.inf)
    sdot = seg_speed * np.min(per_joint, axis=1)
    tri = sdot * accel_time >= 1.0
    t_ramp = np.where(tri, np.sqrt(accel_time / sdot), accel_time)
    accel = np.where(tri, 1.0 / (t_ramp * t_ramp), sdot / accel_time)
    durations = np.where(tri, 2.0 * t_ramp, 1.0 / sdot + accel_time)
    starts = np.concatenate([[0.0], np.cumsum(durations)])
    total = starts[-1]

    t = np.arange(int(np.floor(total * rate)) + 1) / rate
    idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0,
                  len(durations) - 1)
    tau = np.clip(t - starts[idx], 0.0, durations[idx])
    a = accel[idx]
    tr = t_ramp[idx]
    dur = durations[idx]
    sig_up = 0.5 * a * tau * tau
    sig_down = 1.0 - 0.5 * a * (dur - tau) ** 2
    sig_mid = sdot[idx] * (tau - 0.5 * tr)
    sigma = np.where(tau < tr, sig_up,
                     np.where(tau > dur - tr, sig_down, sig_mid))
    sigma = np.clip(sigma, 0.0, 1.0)
    q = seg_from[idx] + sigma[:, None] * seg_delta[idx]
    qd, qdd = _difference_derivatives(q, rate)
    return KinematicTrajectory(t=t, q=q, qd=qd, qdd=qdd,
                               phase=seg_phase[idx], rate=rate)


EXCITE = "excite"


def excitation_trajectory(traj, rate=DEFAULT_RATE_HZ, periods=1.0):
    """Sample a periodic excitation at the plant rate for replay.

    Stored derivatives are central differences of the sampled positions,
    matching every other KinematicTrajectory, so the downstream filter
    and differentiator see exactly what a recorded run would give.
    """
    if rate <= 0.0 or periods <= 0.0:
        raise ContractError("rate and periods must be positive")
    total = traj.base_period * periods
    t = np.arange(int(np.floor(total * rate)) + 1) / rate
    q, _, _ = traj.sample(t)
    qd, qdd = _difference_derivatives(q, rate)
    return KinematicTrajectory(t=t, q=q, qd=qd, qdd=qdd,
                               phase=np.full(t.shape[0], EXCITE, dtype=object),
                               rate=rate)


def torque_components(plant, Q, Qd, Qdd, seed=0):
    """Every additive torque term, keyed by name, plus the sensor noise.

    The sum of the torque entries is exactly what sense_torques writes
    into the dataset, so the composition is reconstructable term by term.
    """
    z = kernels.play_hysteresis(Q, plant.play_width)
    fc = plant.phi_true.fc
    excess = plant.f_static - fc
    rng = np.random.default_rng(seed)
    noise_q = plant.sigma_q * rng.standard_normal(Q.shape)
    noise_tau = plant.sigma_tau * rng.standard_normal(Q.shape)
    return {
        "tau_rbd": rnea_batch(plant.chain, plant.phi_true, Q, Qd, Qdd),
        "tau_hyst": plant.k_h * np.tanh(plant.alpha * (Q - np.asarray(z))),
        "tau_stribeck": (fc + excess * np.exp(-(Qd / plant.v_stribeck) ** 2))
                        * np.sign(Qd),
        "tau_ripple": plant.ripple_amp * np.sin(plant.ripple_freq * Q),
        "tau_noise": noise_tau,
        "q_noise": noise_q,
    }


@dataclass
class Dataset:
    """Measured recording: noisy positions and torques over segments.

    ``seg`` marks contiguous recordings; feature windows must never span
    two segments.  ``meta`` carries the seeds and the plant digest needed
    to regenerate the file bit for bit.
    """

    t: np.ndarray
    seg: np.ndarray
    q: np.ndarray
    tau: np.ndarray
    rate: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        N = self.t.shape[0]
        if self.q.shape[0] != N or self.tau.shape[0] != N or self.seg.shape != (N,):
            raise ContractError("dataset column lengths disagree")

    @property
    def n(self):
        return self.q.shape[1]

    def segments(self):
        """(start, stop) index pairs of the contiguous segments."""
        edges = [0] + (np.flatnonzero(self.seg[1:] != self.seg[:-1]) + 1).tolist()
        edges.append(len(self.seg))
        return list(zip(edges[:-1], edges[1:]))


def sense_torques(plant, traj, seed=0, segment=0):
    """Synthesize the measured dataset for one kinematic trajectory."""
    comp = torque_components(plant, traj.q, traj.qd, traj.qdd, seed=seed)
    tau = (comp["tau_rbd"] + comp["tau_hyst"] + comp["tau_stribeck"]
           + comp["tau_ripple"] + comp["tau_noise"])
    q_meas = traj.q + comp["q_noise"]
    meta = {"plant_seed": int(seed), "rate": plant.rate,
            "plant_digest": plant.digest()}
    return Dataset(t=traj.t.copy(), seg=np.full(len(traj), segment, dtype=np.int64),
                   q=q_meas, tau=tau, rate=plant.rate, meta=meta)


def generate_dataset(plant, path, seed=0, accel_time=DEFAULT_ACCEL_TIME_S):
    """time_parameterize -> sense_torques, with regeneration metadata."""
    traj = time_parameterize(path, plant.chain, rate=plant.rate,
                             accel_time=accel_time)
    ds = sense_torques(plant, traj, seed=seed)
    ds.meta["path_seed"] = int(getattr(path, "seed", -1))
    ds.meta["accel_time"] = float(accel_time)
    ds.meta["n_waypoints"] = int(path.waypoints.shape[0])
    ds.meta["n_reaching"] = int(np.sum(np.asarray(path.phase, dtype=object) == SCAF))
    return ds


def concat_datasets(datasets):
    """Stack recordings as separate segments of one dataset."""
    if not datasets:
        raise ContractError("need at least one dataset")
    rate = datasets[0].rate
    n = datasets[0].n
    if any(d.rate != rate or d.n != n for d in datasets):
        raise ContractError("datasets disagree on rate or joint count")
    seg = np.concatenate([np.full(len(d.t), i, dtype=np.int64)
                          for i, d in enumerate(datasets)])
    meta = dict(datasets[0].meta)
    meta["n_segments"] = len(datasets)
    return Dataset(t=np.concatenate([d.t for d in datasets]), seg=seg,
                   q=np.concatenate([d.q for d in datasets]),
                   tau=np.concatenate([d.tau for d in datasets]),
                   rate=rate, meta=meta)
