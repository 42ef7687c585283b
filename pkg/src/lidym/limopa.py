"""Training-path generation with locally isotropic motion.

A path alternates two kinds of blocks: a reaching move to a randomly
sampled feasible scaffold configuration, then a low-amplitude randomized
Fourier exploration wiggle around it.  The scaffolds are reordered by a
greedy nearest-neighbor chain in joint space so the reaching moves stay
short.  Everything is a pure function of its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .chain import fk_batch
from .errors import ContractError, InfeasibilityError

SCAF = "scaf"
EXPLORE = "explore"

AMP_RANGE_DEG = (0.5, 3.0)
FREQ_RANGE_HZ = (-4.0, 4.0)
N_SUMMANDS = 3
TICK_HZ = 100.0


@dataclass
class WorkspaceSpec:
    """Admissible tool-point region: a sphere quadrant in front of the base.

    Membership requires x > 0, z > 0 and distance from the base origin
    at most ``radius``.
    """

    radius: float = 0.8

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ContractError("workspace radius must be positive")

    def contains(self, pos):
        pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
        inside = (pos[:, 0] > 0.0) & (pos[:, 2] > 0.0)
        inside &= np.einsum("ij,ij->i", pos, pos) <= self.radius ** 2
        return inside


@dataclass
class ScaffoldConfig:
    """A feasible joint configuration with its cached tool position."""

    q: np.ndarray
    ee: np.ndarray


def sample_scaffolds(chain, workspace, count, seed, feasible=None,
                     max_attempts=1_000_000):
    """Uniform joint-space rejection sampling into the workspace.

    ``feasible`` is an optional extra predicate ``f(Q, ee) -> mask`` for
    callers with collision models or other constraints.
    """
    if count < 1:
        raise ContractError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    batch = 2048
    while len(out) < count:
        if attempts >= max_attempts:
            raise InfeasibilityError(
                f"drew {attempts} samples but only {len(out)}/{count} met the "
                "joint-limit + workspace constraints")
        m = min(batch, max_attempts - attempts)
        Q = rng.uniform(chain.pos_lower, chain.pos_upper, size=(m, chain.n))
        attempts += m
        _, _, ee = fk_batch(chain, Q)
        mask = workspace.contains(ee)
        if feasible is not None:
            mask &= np.asarray(feasible(Q, ee), dtype=bool)
        for i in np.flatnonzero(mask):
            out.append(ScaffoldConfig(q=Q[i].copy(), ee=ee[i].copy()))
            if len(out) == count:
                break
    return out


def order_scaffolds(scaffolds):
    """Greedy nearest-neighbor chain starting from the first scaffold.

    A kd-tree shortlists candidates; distances are recomputed exactly and
    ties go to the lowest original index, so the result equals the
    brute-force greedy ordering.
    """
    L = len(scaffolds)
    if L < 1:
        raise ContractError("need at least one scaffold")
    if L == 1:
        return list(scaffolds)
    pts = np.stack([s.q for s in scaffolds])
    tree = cKDTree(pts)
    visited = np.zeros(L, dtype=bool)
    order = [0]
    visited[0] = True
    cur = 0
    for _ in range(L - 1):
        k = 2
        pool = ()
        while True:
            k = min(2 * k, L)
            _, idxs = tree.query(pts[cur], k=k)
            cand = [int(i) for i in np.atleast_1d(idxs) if not visited[i]]
            if cand:
                pool = cand
                break
            if k == L:
                pool = [int(i) for i in np.flatnonzero(~visited)]
                break
        pool = np.asarray(pool)
        d2 = np.einsum("ij,ij->i", pts[pool] - pts[cur], pts[pool] - pts[cur])
        nxt = int(pool[np.lexsort((pool, d2))[0]])
        order.append(nxt)
        visited[nxt] = True
        cur = nxt
    return [scaffolds[i] for i in order]


@dataclass
class ExplorationPhase:
    """Low-amplitude Fourier wiggle anchored at a scaffold.

    ``waypoints[0]`` equals the anchor exactly: the series is shifted by
    its own initial value before being added.
    """

    amps_deg: np.ndarray
    freqs_hz: np.ndarray
    phases: np.ndarray
    t_rand: int
    waypoints: np.ndarray


def exploration_phase(anchor, chain, seed, t_rand_range=(2000, 2500)):
    """Randomized per-joint sinusoid block around one scaffold."""
    lo, hi = int(t_rand_range[0]), int(t_rand_range[1])
    if not 1 <= lo <= hi:
        raise ContractError("t_rand range must satisfy 1 <= lo <= hi")
    rng = np.random.default_rng(seed)
    n = chain.n
    t_rand = int(rng.integers(lo, hi + 1))
    amps = rng.uniform(*AMP_RANGE_DEG, size=(n, N_SUMMANDS))
    freqs = rng.uniform(*FREQ_RANGE_HZ, size=(n, N_SUMMANDS))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n, N_SUMMANDS))
    t = np.arange(t_rand) / TICK_HZ
    arg = 2.0 * np.pi * freqs[None, :, :] * t[:, None, None] + phases[None, :, :]
    e = np.einsum("jk,tjk->tj", np.deg2rad(amps), np.sin(arg))
    way = anchor.q[None, :] + (e - e[0])
    np.clip(way, chain.pos_lower, chain.pos_upper, out=way)
    return ExplorationPhase(amps_deg=amps, freqs_hz=freqs, phases=phases,
                            t_rand=t_rand, waypoints=way)


@dataclass
class ConfigPath:
    """Alternating scaffold / exploration waypoints with speed factors.

    ``phase[i]`` is ``"scaf"`` or ``"explore"``; ``speed[i]`` is the
    relative velocity factor of the transit ending at waypoint i.
    """

    waypoints: np.ndarray
    phase: np.ndarray
    speed: np.ndarray
    seed: int = field(default=-1)

    def __post_init__(self):
        M = self.waypoints.shape[0]
        if self.phase.shape != (M,) or self.speed.shape != (M,):
            raise ContractError("phase and speed must match the waypoint count")

    @property
    def n(self):
        return self.waypoints.shape[1]

    def blocks(self):
        """(start, stop, phase) runs of constant annotation."""
        edges = [0] + (np.flatnonzero(self.phase[1:] != self.phase[:-1]) + 1).tolist()
        edges.append(len(self.phase))
        return [(a, b, str(self.phase[a])) for a, b in zip(edges[:-1], edges[1:])]


def assemble_path(scaffolds, chain, seed, t_rand_range=(2000, 2500),
                  reach_speed=(0.6, 0.9), explore_speed=(0.1, 0.3)):
    """Interleave ordered scaffolds with exploration blocks.

    Per block, one reaching speed factor ~U(reach_speed) applies to the
    scaffold transit and one exploring factor ~U(explore_speed) to every
    waypoint of the wiggle.
    """
    if not scaffolds:
        raise ContractError("need at least one scaffold")
    rng = np.random.default_rng(seed)
    ways, phases, speeds = [], [], []
    for scaf in scaffolds:
        block_seed = int(rng.integers(0, 2 ** 63))
        u_reach = rng.uniform(*reach_speed)
        u_explore = rng.uniform(*explore_speed)
        exp = exploration_phase(scaf, chain, block_seed, t_rand_range)
        ways.append(scaf.q[None, :])
        phases.append([SCAF])
        speeds.append([u_reach])
        ways.append(exp.waypoints)
        phases.append([EXPLORE] * exp.t_rand)
        speeds.append([u_explore] * exp.t_rand)
    return ConfigPath(waypoints=np.concatenate(ways, axis=0),
                      phase=np.array(sum(phases, []), dtype=object),
                      speed=np.array(sum(speeds, [])), seed=seed)


def generate_path(chain, n_scaffolds, seed, workspace=None,
                  t_rand_range=(2000, 2500), feasible=None,
                  reach_speed=(0.6, 0.9), explore_speed=(0.1, 0.3)):
    """Sample, order and assemble in one seeded call."""
    workspace = workspace or WorkspaceSpec()
    scafs = sample_scaffolds(chain, workspace, n_scaffolds, seed,
                             feasible=feasible)
    return assemble_path(order_scaffolds(scafs), chain, seed + 1,
                         t_rand_range=t_rand_range, reach_speed=reach_speed,
                         explore_speed=explore_speed)
