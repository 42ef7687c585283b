"""Trapezoidal time parameterization and the synthetic torque plant."""

import numpy as np
import pytest

from lidym.errors import ContractError
from lidym.limopa import EXPLORE, SCAF, ConfigPath, generate_path
from lidym.plant import (Dataset, PlantModel, concat_datasets, default_plant,
                         generate_dataset, sense_torques, time_parameterize,
                         torque_components)


def _two_point_path(delta, speed=0.6, n=7, joint=0):
    w = np.zeros((2, n))
    w[1, joint] = delta
    return ConfigPath(waypoints=w,
                      phase=np.array([SCAF, SCAF], dtype=object),
                      speed=np.array([speed, speed]))


class TestTimeParameterize:
    def test_cruise_velocity_is_exact(self, ref_chain):
        # 10 deg move at factor 0.6: the cruise plateau runs the binding
        # joint at exactly 0.6 x its velocity limit, and central
        # differences of a linear ramp recover that value exactly
        path = _two_point_path(np.deg2rad(10.0), speed=0.6)
        traj = time_parameterize(path, ref_chain, rate=100.0, accel_time=0.05)
        cruise = 0.6 * ref_chain.vel_limit[0]
        mid = len(traj) // 2
        assert traj.qd[mid, 0] == pytest.approx(cruise, rel=1e-12)
        assert np.abs(traj.qd[:, 0]).max() <= cruise * (1.0 + 1e-12)

    def test_starts_at_first_waypoint_ends_near_last(self, ref_chain):
        path = _two_point_path(np.deg2rad(25.0))
        traj = time_parameterize(path, ref_chain, rate=100.0)
        assert np.array_equal(traj.q[0], path.waypoints[0])
        vmax = 0.6 * ref_chain.vel_limit[0]
        assert abs(traj.q[-1, 0] - path.waypoints[1, 0]) <= vmax / 100.0

    def test_profile_is_monotone_per_segment(self, ref_chain):
        path = _two_point_path(np.deg2rad(30.0))
        traj = time_parameterize(path, ref_chain, rate=200.0)
        assert (np.diff(traj.q[:, 0]) >= 0.0).all()
        assert (traj.q[:, 0] <= np.deg2rad(30.0)).all()

    def test_end_velocities_are_small(self, ref_chain):
        # the profile starts and ends at rest; the first sample lands on
        # t=0 exactly, the last up to one tick early, so the one-sided
        # differences see at most half resp. two acceleration steps
        rate = 1000.0
        path = _two_point_path(np.deg2rad(10.0), speed=0.6)
        traj = time_parameterize(path, ref_chain, rate=rate, accel_time=0.05)
        sdot = 0.6 * ref_chain.vel_limit[0] / np.deg2rad(10.0)
        joint_accel = sdot / 0.05 * np.deg2rad(10.0)
        assert abs(traj.qd[0, 0]) <= 0.51 * joint_accel / rate
        assert abs(traj.qd[-1, 0]) <= 2.01 * joint_accel / rate

    def test_short_move_uses_triangular_profile(self, ref_chain):
        delta = np.deg2rad(0.1)
        path = _two_point_path(delta, speed=0.6)
        traj = time_parameterize(path, ref_chain, rate=1000.0, accel_time=0.05)
        sdot = 0.6 * ref_chain.vel_limit[0] / delta
        expected = 2.0 * np.sqrt(0.05 / sdot)
        assert traj.t[-1] == pytest.approx(expected, abs=1.5e-3)
        # the triangular peak stays below the requested cruise rate
        assert np.abs(traj.qd[:, 0]).max() < 0.6 * ref_chain.vel_limit[0]
        assert traj.q[-1, 0] == pytest.approx(delta, rel=0.01)

    def test_derivatives_are_central_differences(self, ref_chain):
        path = generate_path(ref_chain, 2, seed=5, t_rand_range=(40, 60))
        traj = time_parameterize(path, ref_chain, rate=100.0)
        dt = 0.01
        qd_ref = (traj.q[2:] - traj.q[:-2]) / (2 * dt)
        qdd_ref = (traj.q[2:] - 2 * traj.q[1:-1] + traj.q[:-2]) / dt ** 2
        assert np.array_equal(traj.qd[1:-1], qd_ref)
        assert np.array_equal(traj.qdd[1:-1], qdd_ref)

    def test_time_grid_is_uniform(self, ref_chain):
        path = _two_point_path(np.deg2rad(15.0))
        traj = time_parameterize(path, ref_chain, rate=250.0)
        assert np.array_equal(traj.t, np.arange(len(traj)) / 250.0)
        assert traj.rate == 250.0

    def test_velocity_limits_respected_on_full_path(self, ref_chain):
        for seed in range(3):
            path = generate_path(ref_chain, 3, seed=seed,
                                 t_rand_range=(100, 150))
            traj = time_parameterize(path, ref_chain, rate=100.0)
            ratio = np.abs(traj.qd) / ref_chain.vel_limit
            assert ratio.max() <= 0.9 + 1e-9
            assert ref_chain.inside_limits(traj.q).all()

    def test_zero_length_segments_skipped(self, ref_chain):
        w = np.zeros((4, 7))
        w[2:, 0] = 0.1
        path = ConfigPath(waypoints=w,
                          phase=np.array([SCAF] * 4, dtype=object),
                          speed=np.full(4, 0.5))
        traj = time_parameterize(path, ref_chain, rate=100.0)
        assert traj.q[-1, 0] == pytest.approx(0.1, abs=1e-3)

    def test_phase_annotation_follows_segment_target(self, ref_chain):
        path = generate_path(ref_chain, 2, seed=1, t_rand_range=(50, 60))
        traj = time_parameterize(path, ref_chain, rate=100.0)
        kinds = {str(p) for p in np.unique(traj.phase)}
        assert kinds == {SCAF, EXPLORE}
        # the path starts at its first scaffold already exploring; the
        # scaf label marks samples of later reaching transits
        assert str(traj.phase[0]) == EXPLORE
        scaf_frac = np.mean(traj.phase == SCAF)
        assert 0.0 < scaf_frac < 0.5

    def test_motionless_path_rejected(self, ref_chain):
        w = np.zeros((3, 7))
        path = ConfigPath(waypoints=w,
                          phase=np.array([SCAF] * 3, dtype=object),
                          speed=np.full(3, 0.5))
        with pytest.raises(ContractError):
            time_parameterize(path, ref_chain)

    def test_bad_inputs_rejected(self, ref_chain):
        path = _two_point_path(0.1)
        with pytest.raises(ContractError):
            time_parameterize(path, ref_chain, rate=0.0)
        with pytest.raises(ContractError):
            time_parameterize(path, ref_chain, accel_time=-1.0)
        single = ConfigPath(waypoints=np.zeros((1, 7)),
                            phase=np.array([SCAF], dtype=object),
                            speed=np.ones(1))
        with pytest.raises(ContractError):
            time_parameterize(single, ref_chain)


class TestPlantModel:
    def test_default_plant_constants(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        assert np.array_equal(plant.f_static, 1.5 * ref_params.fc)
        assert plant.play_width.shape == (7,)
        assert np.allclose(plant.play_width, np.deg2rad(0.5))

    def test_validation(self, ref_chain, ref_params):
        with pytest.raises(ContractError):
            PlantModel(chain=ref_chain, phi_true=ref_params, play_width=-0.1,
                       k_h=1.0, alpha=10.0, f_static=1.0, v_stribeck=0.05,
                       ripple_amp=0.0, ripple_freq=1.0)
        with pytest.raises(ContractError):
            PlantModel(chain=ref_chain, phi_true=ref_params, play_width=0.01,
                       k_h=1.0, alpha=10.0, f_static=1.0, v_stribeck=0.0,
                       ripple_amp=0.0, ripple_freq=1.0)
        with pytest.raises(ContractError):
            default_plant(ref_chain, ref_params, sigma_tau=-0.1)

    def test_digest_tracks_constants(self, ref_chain, ref_params):
        a = default_plant(ref_chain, ref_params)
        b = default_plant(ref_chain, ref_params)
        c = default_plant(ref_chain, ref_params, sigma_tau=0.03)
        assert a.digest() == b.digest()
        assert a.digest() != c.digest()


def _triangle_cycle(amplitude, step, cycles=2):
    """Closed 0 -> +a -> -a -> 0 triangle wave as joint-0 positions."""
    up = np.arange(0.0, amplitude, step)
    down = np.arange(amplitude, -amplitude, -step)
    back = np.arange(-amplitude, 0.0 + step / 2, step)
    one = np.concatenate([up, down, back])
    return np.tile(one, cycles)


class TestTorqueSynthesis:
    def test_components_sum_to_measurement(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        path = generate_path(ref_chain, 2, seed=3, t_rand_range=(60, 80))
        traj = time_parameterize(path, ref_chain, rate=plant.rate)
        ds = sense_torques(plant, traj, seed=11)
        comp = torque_components(plant, traj.q, traj.qd, traj.qdd, seed=11)
        total = (comp["tau_rbd"] + comp["tau_hyst"] + comp["tau_stribeck"]
                 + comp["tau_ripple"] + comp["tau_noise"])
        assert np.array_equal(ds.tau, total)
        assert np.array_equal(ds.q, traj.q + comp["q_noise"])

    def test_noiseless_plant_measures_true_positions(self, ref_chain,
                                                     ref_params):
        plant = default_plant(ref_chain, ref_params, sigma_tau=0.0,
                              sigma_q=0.0)
        path = generate_path(ref_chain, 1, seed=4, t_rand_range=(50, 60))
        traj = time_parameterize(path, ref_chain, rate=plant.rate)
        ds = sense_torques(plant, traj, seed=0)
        assert np.array_equal(ds.q, traj.q)

    def test_noise_level_matches_sigma(self, ref_chain, ref_params):
        quiet = default_plant(ref_chain, ref_params, sigma_tau=0.0,
                              sigma_q=0.0)
        noisy = default_plant(ref_chain, ref_params, sigma_tau=0.02,
                              sigma_q=0.0)
        path = generate_path(ref_chain, 2, seed=8, t_rand_range=(200, 250))
        traj = time_parameterize(path, ref_chain, rate=100.0)
        d0 = sense_torques(quiet, traj, seed=5)
        d1 = sense_torques(noisy, traj, seed=5)
        resid = d1.tau - d0.tau
        assert np.std(resid) == pytest.approx(0.02, rel=0.05)

    def test_seed_controls_noise(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        path = generate_path(ref_chain, 1, seed=2, t_rand_range=(40, 50))
        traj = time_parameterize(path, ref_chain, rate=plant.rate)
        a = sense_torques(plant, traj, seed=1)
        b = sense_torques(plant, traj, seed=1)
        c = sense_torques(plant, traj, seed=2)
        assert np.array_equal(a.tau, b.tau)
        assert not np.array_equal(a.tau, c.tau)

    def test_hysteresis_loop_has_positive_area(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        q0 = _triangle_cycle(np.deg2rad(2.0), np.deg2rad(0.05))
        Q = np.zeros((len(q0), 7))
        Q[:, 0] = q0
        Qd = np.zeros_like(Q)
        comp = torque_components(plant, Q, Qd, Qd, seed=0)
        tau = comp["tau_hyst"][:, 0]
        # dissipated energy per traversal: closed-loop line integral of
        # tau dq is positive for a play-type hysteresis
        area = np.sum(0.5 * (tau[1:] + tau[:-1]) * np.diff(q0))
        assert area > 0.0
        assert area > 1e-4

    def test_hysteresis_saturates_at_bound(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        q0 = np.linspace(0.0, np.deg2rad(10.0), 400)
        Q = np.zeros((len(q0), 7))
        Q[:, 0] = q0
        Z = np.zeros_like(Q)
        comp = torque_components(plant, Q, Z, Z, seed=0)
        bound = plant.k_h[0] * np.tanh(plant.alpha[0] * plant.play_width[0])
        tail = comp["tau_hyst"][-50:, 0]
        assert np.all(np.abs(tail - bound) <= 0.01 * bound)
        assert np.abs(comp["tau_hyst"][:, 0]).max() <= bound * (1 + 1e-12)

    def test_hysteresis_sign_flips_after_reversal(self, ref_chain,
                                                  ref_params):
        plant = default_plant(ref_chain, ref_params)
        w = plant.play_width[0]
        up = np.linspace(0.0, 20 * w, 200)
        down = np.linspace(20 * w, 10 * w, 100)
        Q = np.zeros((300, 7))
        Q[:, 0] = np.concatenate([up, down])
        Z = np.zeros_like(Q)
        tau = torque_components(plant, Q, Z, Z, seed=0)["tau_hyst"][:, 0]
        bound = plant.k_h[0] * np.tanh(plant.alpha[0] * w)
        assert tau[199] == pytest.approx(bound, rel=1e-6)
        assert tau[-1] == pytest.approx(-bound, rel=1e-6)

    def test_stribeck_shape(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        fc = ref_params.fc[0]
        fs = plant.f_static[0]
        Q = np.zeros((4, 7))
        Qd = np.zeros((4, 7))
        Qd[:, 0] = [0.0, 1e-6, plant.v_stribeck[0], 5.0]
        tau = torque_components(plant, Q, Qd, np.zeros_like(Q),
                                seed=0)["tau_stribeck"][:, 0]
        assert tau[0] == 0.0
        assert tau[1] == pytest.approx(fs, rel=1e-3)
        assert tau[2] == pytest.approx(fc + (fs - fc) / np.e, rel=1e-12)
        assert tau[3] == pytest.approx(fc, rel=1e-6)
        # breakaway exceeds the sliding level
        assert tau[1] > tau[3]

    def test_ripple_is_spatial(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        Q = np.zeros((5, 7))
        Q[:, 0] = np.linspace(-0.3, 0.3, 5)
        comp = torque_components(plant, Q, np.zeros_like(Q), np.zeros_like(Q),
                                 seed=0)
        want = plant.ripple_amp[0] * np.sin(plant.ripple_freq[0] * Q[:, 0])
        assert np.allclose(comp["tau_ripple"][:, 0], want, atol=1e-15)


class TestDataset:
    def test_generate_dataset_metadata(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        path = generate_path(ref_chain, 2, seed=6, t_rand_range=(50, 70))
        ds = generate_dataset(plant, path, seed=9)
        assert ds.meta["plant_seed"] == 9
        assert ds.meta["rate"] == plant.rate
        assert ds.meta["n_reaching"] == 2
        assert "plant_digest" in ds.meta and "accel_time" in ds.meta
        assert (ds.seg == 0).all()
        assert len(ds.segments()) == 1

    def test_concat_assigns_segment_ids(self, ref_chain, ref_params):
        plant = default_plant(ref_chain, ref_params)
        parts = []
        for seed in range(3):
            path = generate_path(ref_chain, 1, seed=seed,
                                 t_rand_range=(30, 40))
            parts.append(generate_dataset(plant, path, seed=seed))
        ds = concat_datasets(parts)
        assert np.array_equal(np.unique(ds.seg), [0, 1, 2])
        segs = ds.segments()
        assert len(segs) == 3
        for (a, b), part in zip(segs, parts):
            assert b - a == len(part.t)
            assert np.array_equal(ds.tau[a:b], part.tau)

    def test_concat_rejects_rate_mismatch(self, ref_chain, ref_params):
        p1 = default_plant(ref_chain, ref_params, rate=100.0)
        p2 = default_plant(ref_chain, ref_params, rate=200.0)
        path = generate_path(ref_chain, 1, seed=0, t_rand_range=(20, 30))
        a = generate_dataset(p1, path, seed=0)
        b = generate_dataset(p2, path, seed=0)
        with pytest.raises(ContractError):
            concat_datasets([a, b])

    def test_column_length_validation(self):
        with pytest.raises(ContractError):
            Dataset(t=np.zeros(5), seg=np.zeros(4, dtype=np.int64),
                    q=np.zeros((5, 7)), tau=np.zeros((5, 7)), rate=100.0)
