"""Model scoring and the ablation harness.

Every grid entry is trained (or, for the rigid-body baseline, used as
is) and scored on the validation windows of its own seeded split as
per-joint mean squared torque error plus the joint average.  Variants
sharing a window length share the identical split, so ablation
differences come from the model, not the data.  Training faults are
recorded in the affected row instead of aborting the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import split_windows
from .errors import ContractError, TrainingFault
from .nets import N_JOINTS, NetworkSpec
from .training import TrainConfig, train

DEFAULT_SEQ_T = 50
RBD_LABEL = "RBD"


def mse_per_joint(pred, target):
    """Per-joint mean squared error in Nm^2, shape (n,)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ContractError("prediction and target shapes disagree")
    return np.mean((pred - target) ** 2, axis=0)


def variant_label(variant, use_tau_rbd, use_r):
    """Readable row label: base name plus its enabled extras."""
    extras = []
    if use_tau_rbd:
        extras.append("with tau_rbd")
    if use_r:
        extras.append("with r")
    return variant if not extras else f"{variant} ({', '.join(extras)})"


def _spec(variant, T, use_tau_rbd, use_r, seed, widths=None):
    return NetworkSpec(variant=variant, T=T, use_r=use_r,
                       use_tau_rbd=use_tau_rbd,
                       hybrid_output_add=use_tau_rbd, seed=seed,
                       widths=widths)


def desk_grid(seq_T=DEFAULT_SEQ_T, seed=0, widths=None):
    """The default ablation table: 13 rows.

    The rigid-body baseline, MLP-7 standalone vs hybrid, the full
    hybrid/standalone x r cross for LSTM-2 and LSTM-FCL, and the hybrid
    transformer with and without the rotation-history channel.
    """
    w = widths or {}
    rows = [(RBD_LABEL, None)]
    for rbd in (False, True):
        rows.append((variant_label("MLP-7", rbd, True),
                     _spec("MLP-7", 1, rbd, True, seed, w.get("MLP-7"))))
    for variant in ("LSTM-2", "LSTM-FCL"):
        for rbd in (False, True):
            for use_r in (True, False):
                rows.append((variant_label(variant, rbd, use_r),
                             _spec(variant, seq_T, rbd, use_r, seed,
                                   w.get(variant))))
    for use_r in (True, False):
        rows.append((variant_label("TransformerEnc", True, use_r),
                     _spec("TransformerEnc", seq_T, True, use_r, seed,
                           w.get("TransformerEnc"))))
    return rows


def desk_config(seed=0, epochs=30, runs=2, max_windows_per_epoch=2000,
                max_val_windows=2000):
    """Training budget sized for a workstation-scale ablation."""
    return TrainConfig(epochs=epochs, batch=50, lr=1e-3, runs=runs,
                       max_windows_per_epoch=max_windows_per_epoch,
                       max_val_windows=max_val_windows, seed=seed)


@dataclass
class EvalRow:
    """One scored ablation entry."""

    label: str
    spec: object
    per_joint: np.ndarray
    avg: float
    best_val: float = np.nan
    run_index: int = -1
    n_val: int = 0
    fault: str = ""
    model: object = field(default=None, repr=False, compare=False)

    @property
    def ok(self):
        return not self.fault


@dataclass
class EvalReport:
    """Ordered ablation rows plus reproduction metadata."""

    rows: list
    meta: dict = field(default_factory=dict)

    def row(self, label):
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def labels(self):
        return [r.label for r in self.rows]

    def best(self, labels=None):
        """Lowest-average OK row, optionally among the given labels."""
        pool = [r for r in self.rows
                if r.ok and (labels is None or r.label in labels)]
        if not pool:
            raise ContractError("no successful rows to choose from")
        return min(pool, key=lambda r: r.avg)


def _rbd_row(features, T, config):
    ws = split_windows(features, T, seed=config.seed, split=config.split)
    rows = ws.val + T - 1
    per = mse_per_joint(features.tau_rbd[rows], features.Y[rows])
    return EvalRow(label=RBD_LABEL, spec=None, per_joint=per,
                   avg=float(np.mean(per)), n_val=rows.size)


def run_ablation(features, grid=None, config=None, seq_T=DEFAULT_SEQ_T,
                 keep_models=False):
    """Train and score every grid row; faults stay inside their row.

    Scoring uses the held-out validation windows of each row's split.
    With keep_models the trained network rides along on its row so the
    caller can checkpoint it.
    """
    config = config or desk_config()
    grid = grid if grid is not None else desk_grid(seq_T=seq_T,
                                                   seed=config.seed)
    out = []
    for label, spec in grid:
        if spec is None:
            out.append(_rbd_row(features, seq_T, config))
            continue
        try:
            tm = train(spec, features, config=config)
            rows = tm.split.val + spec.T - 1
            per = mse_per_joint(tm.predict(features, tm.split.val),
                                features.Y[rows])
            out.append(EvalRow(label=label, spec=spec, per_joint=per,
                               avg=float(np.mean(per)),
                               best_val=tm.best_val,
                               run_index=tm.run_index, n_val=rows.size,
                               model=tm if keep_models else None))
        except TrainingFault as exc:
            out.append(EvalRow(label=label, spec=spec,
                               per_joint=np.full(N_JOINTS, np.nan),
                               avg=np.nan, fault=str(exc)))
    meta = {"seed": config.seed, "epochs": config.epochs,
            "runs": config.runs, "n_samples": len(features),
            "seq_T": seq_T, "split": "validation"}
    return EvalReport(rows=out, meta=meta)
