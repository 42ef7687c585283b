"""The composed experiment recipes at reduced scale."""

import numpy as np
import pytest

from lidym.evaluation import desk_config
from lidym.pipeline import (desk_dataset, desk_experiment, identify_on_plant)
from lidym.plant import default_plant


@pytest.fixture(scope="module")
def plant(ref_chain, ref_params):
    return default_plant(ref_chain, ref_params)


class TestIdentifyOnPlant:
    def test_quality_on_default_plant(self, plant):
        model = identify_on_plant(plant, seed=0)
        d = model.diagnostics
        assert d["rank"] == 57
        assert d["cond"] < 2000.0
        # residual absorbs noise plus the unmodeled hysteresis, Stribeck
        # and ripple terms, but must stay far below the signal scale
        assert d["residual_rms"] < 2.0

    def test_seed_changes_recording(self, plant):
        a = identify_on_plant(plant, seed=0)
        b = identify_on_plant(plant, seed=1)
        assert not np.array_equal(a.phi_base, b.phi_base)

    def test_deterministic(self, plant):
        a = identify_on_plant(plant, seed=2)
        b = identify_on_plant(plant, seed=2)
        assert np.array_equal(a.phi_base, b.phi_base)


class TestDeskDataset:
    def test_multiple_paths_concatenate(self, plant):
        ds = desk_dataset(plant, seed=0, n_scaffolds=2, t_rand_range=(20, 30),
                          n_paths=2)
        assert set(np.unique(ds.seg)) == {0, 1}
        assert ds.t.size > 100

    def test_single_path_has_one_segment(self, plant):
        ds = desk_dataset(plant, seed=0, n_scaffolds=2, t_rand_range=(20, 30))
        assert set(np.unique(ds.seg)) == {0}


class TestDeskExperiment:
    def test_tiny_end_to_end(self):
        result = desk_experiment(seed=5, n_scaffolds=3, t_rand_range=(40, 60),
                                 config=desk_config(seed=5, epochs=1, runs=1,
                                                    max_windows_per_epoch=60,
                                                    max_val_windows=40),
                                 seq_T=6)
        rep = result.report
        assert len(rep.rows) == 13
        assert rep.labels()[0] == "RBD"
        assert all(r.ok for r in rep.rows)
        assert rep.meta["n_scaffolds"] == 3
        assert rep.meta["t_rand_range"] == (40, 60)
        assert rep.meta["plant_digest"] == result.plant.digest()
        assert rep.rows[0].model is None
        assert len(result.features) == result.dataset.t.size - 4 * 1
