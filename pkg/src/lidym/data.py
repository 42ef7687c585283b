"""Feature construction and windowing on top of measured datasets.

Each dataset segment is filtered and differentiated independently, the
rotational-history channel is folded from the filtered positions with a
fresh encoder state, and the rigid-body torque prediction is attached
both as input columns and as the hybrid baseline.  Windows are stride-1
slices that never straddle a segment boundary; the train/validation
split is a seeded permutation at window granularity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import encode_batch
from .errors import ContractError
from .identification import ObservationSet, preprocess
from .nets import FEATURE_GROUPS, N_JOINTS, feature_columns


def feature_indices(use_r=True, use_tau_rbd=True):
    """Column indices into the full feature layout for the given flags."""
    keep = {"q", "qd", "qdd"}
    if use_r:
        keep.add("r")
    if use_tau_rbd:
        keep.add("tau_rbd")
    idx = []
    for gi, g in enumerate(FEATURE_GROUPS):
        if g in keep:
            idx.extend(range(gi * N_JOINTS, (gi + 1) * N_JOINTS))
    return np.asarray(idx, dtype=np.intp)


@dataclass
class FeatureSet:
    """Aligned per-sample inputs and targets, tagged by source segment.

    X holds the full column layout (q, qd, qdd, r, tau_rbd); variants
    that use fewer inputs select columns via feature_indices.  Y is the
    filtered measured torque; tau_rbd is kept separately as the additive
    baseline of hybrid models.
    """

    X: np.ndarray
    Y: np.ndarray
    seg: np.ndarray
    tau_rbd: np.ndarray
    columns: tuple
    rate: float

    def __post_init__(self):
        N = self.X.shape[0]
        if self.X.shape != (N, len(self.columns)):
            raise ContractError("feature matrix does not match column labels")
        if self.Y.shape[0] != N or self.seg.shape != (N,) \
                or self.tau_rbd.shape != self.Y.shape:
            raise ContractError("feature set arrays disagree in length")

    def __len__(self):
        return self.X.shape[0]


def attach_features(dataset, rbd_model, cutoff_hz=5.0):
    """Filter, differentiate, encode and predict per segment, then stack."""
    cols = tuple(feature_columns(use_r=True, use_tau_rbd=True))
    Xs, Ys, segs, rbds = [], [], [], []
    for seg_id, (a, b) in enumerate(dataset.segments()):
        obs = ObservationSet(t=dataset.t[a:b], q=dataset.q[a:b],
                             tau=dataset.tau[a:b], rate=dataset.rate)
        p = preprocess(obs, cutoff_hz=cutoff_hz)
        r = encode_batch(p.q)
        tau_rbd = rbd_model.predict_batch(p.q, p.qd, p.qdd)
        Xs.append(np.concatenate([p.q, p.qd, p.qdd, r, tau_rbd], axis=1))
        Ys.append(p.tau)
        rbds.append(tau_rbd)
        segs.append(np.full(p.q.shape[0], seg_id, dtype=np.int64))
    return FeatureSet(X=np.concatenate(Xs), Y=np.concatenate(Ys),
                      seg=np.concatenate(segs), tau_rbd=np.concatenate(rbds),
                      columns=cols, rate=dataset.rate)


def window_starts(seg, T):
    """Start rows of every length-T window that stays inside one segment."""
    if T < 1:
        raise ContractError("window length must be >= 1")
    seg = np.asarray(seg)
    starts = []
    edges = [0] + (np.flatnonzero(seg[1:] != seg[:-1]) + 1).tolist()
    edges.append(len(seg))
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a >= T:
            starts.append(np.arange(a, b - T + 1))
    if not starts:
        raise ContractError(
            f"no segment is long enough for windows of length {T}")
    return np.concatenate(starts)


@dataclass
class WindowSplit:
    """Seeded train/validation partition of window start rows.

    The same (seed, T) always yields the same partition, so ablation
    variants sharing a window length are scored on identical windows.
    """

    T: int
    starts: np.ndarray
    train: np.ndarray
    val: np.ndarray
    seed: int


def split_windows(features, T, seed=0, split=0.8):
    """Permute the valid windows and cut once at the split fraction."""
    if not 0.0 < split < 1.0:
        raise ContractError("split fraction must be strictly inside (0, 1)")
    starts = window_starts(features.seg, T)
    if starts.size < 2:
        raise ContractError("need at least two windows to split")
    perm = np.random.default_rng(seed).permutation(starts.size)
    n_train = int(round(split * starts.size))
    n_train = min(max(n_train, 1), starts.size - 1)
    return WindowSplit(T=T, starts=starts,
                       train=np.sort(starts[perm[:n_train]]),
                       val=np.sort(starts[perm[n_train:]]), seed=seed)


def gather_windows(X, starts, T):
    """(B, T, D) window batch from start rows, by fancy indexing."""
    starts = np.asarray(starts, dtype=np.intp)
    return X[starts[:, None] + np.arange(T)[None, :]]
