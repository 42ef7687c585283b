"""End-to-end experiment recipes built from the library stages.

One seeded call runs the whole chain: excite the plant and identify the
rigid-body model, generate an exploration path and record the training
dataset, attach features, and score the ablation grid.  The command
line and the acceptance checks both run these exact recipes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import attach_features
from .evaluation import desk_config, desk_grid, run_ablation
from .excitation import optimize, synthesize
from .identification import ObservationSet, identify_from_observations, preprocess
from .limopa import generate_path
from .plant import (DEFAULT_ACCEL_TIME_S, concat_datasets, default_plant,
                    excitation_trajectory, generate_dataset, sense_torques)
from .reference import reference_chain, reference_params

IDENT_SEED_OFFSET = 1000
DATA_SEED_OFFSET = 2000


def identify_on_plant(plant, seed=0, periods=2.0, opt_budget=0,
                      cutoff_hz=5.0):
    """Excite the plant and identify a rigid-body model from the replay.

    With opt_budget > 0 the excitation is condition-number optimized
    first; otherwise the seeded synthesis is replayed as drawn.
    """
    chain = plant.chain
    if opt_budget > 0:
        traj = optimize(chain, budget=opt_budget, seed=seed).trajectory
    else:
        traj = synthesize(chain, seed=seed)
    ktraj = excitation_trajectory(traj, rate=plant.rate, periods=periods)
    ds = sense_torques(plant, ktraj, seed=seed + IDENT_SEED_OFFSET)
    obs = ObservationSet(t=ds.t, q=ds.q, tau=ds.tau, rate=ds.rate)
    return identify_from_observations(chain, preprocess(obs,
                                                        cutoff_hz=cutoff_hz))


def desk_dataset(plant, seed=0, n_scaffolds=12, t_rand_range=(400, 500),
                 n_paths=1, accel_time=DEFAULT_ACCEL_TIME_S):
    """The standard training recording: exploration paths on the plant."""
    parts = []
    for k in range(n_paths):
        path = generate_path(plant.chain, n_scaffolds, seed=seed + k,
                             t_rand_range=t_rand_range)
        parts.append(generate_dataset(plant, path,
                                      seed=seed + DATA_SEED_OFFSET + k,
                                      accel_time=accel_time))
    return parts[0] if n_paths == 1 else concat_datasets(parts)


@dataclass
class ExperimentResult:
    """Everything the desk experiment produced, for reports and audits."""

    report: object
    rbd_model: object
    dataset: object
    features: object
    plant: object
    seed: int


def desk_experiment(seed=0, n_scaffolds=12, t_rand_range=(400, 500),
                    config=None, grid=None, seq_T=50, opt_budget=0,
                    chain=None, phi_true=None, keep_models=False,
                    plant=None, accel_time=DEFAULT_ACCEL_TIME_S):
    """The full reproduction recipe on the reference chain."""
    if plant is None:
        chain = chain or reference_chain()
        phi_true = phi_true if phi_true is not None else reference_params()
        plant = default_plant(chain, phi_true)
    rbd = identify_on_plant(plant, seed=seed, opt_budget=opt_budget)
    dataset = desk_dataset(plant, seed=seed, n_scaffolds=n_scaffolds,
                           t_rand_range=t_rand_range, accel_time=accel_time)
    features = attach_features(dataset, rbd)
    config = config or desk_config(seed=seed)
    report = run_ablation(features, grid=grid, config=config, seq_T=seq_T,
                          keep_models=keep_models)
    report.meta.update({"n_scaffolds": n_scaffolds,
                        "t_rand_range": tuple(t_rand_range),
                        "plant_digest": plant.digest()})
    return ExperimentResult(report=report, rbd_model=rbd, dataset=dataset,
                            features=features, plant=plant, seed=seed)
