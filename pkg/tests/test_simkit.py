import numpy as np
import pandas as pd
import pytest

from bnkf.errors import DatasetError, GeometryError, SchemaError
from bnkf.geom import NoiseSigmas, SensorPose, SphericalMeasurement, cartesian_from_spherical, spherical_from_cartesian
from bnkf.simkit import (
    DATASET_COLUMNS,
    NOISE_TIERS,
    MeasurementSequence,
    SupervisedDataset,
    Trajectory,
    TrajectoryParams,
    assign_folds,
    build_supervised,
    downsample,
    generate_cv_trajectory,
    generate_trajectory,
    read_dataset,
    read_manifest,
    read_measurements,
    read_trajectories,
    retained_count,
    simulate_measurements,
    tier_sigmas,
    truth_at,
    write_csv,
    write_dataset,
    write_manifest,
    write_measurements,
    write_trajectories,
)


def _dataset(n_traj, tier="medium", duration=3.0, dt=0.5, rates=(1.0,), origin=None):
    origin = origin or SensorPose()
    parts = []
    for i in range(n_traj):
        traj = generate_trajectory(100 + i, duration, dt, traj_id=i)
        seq = simulate_measurements(traj, origin, tier, seed=200 + i)
        for rate in rates:
            parts.append(build_supervised(downsample(seq, rate, 300 + i), traj))
    return SupervisedDataset.concat(parts)


def _static_track(n, position=(4000.0, 3000.0, 500.0), velocity=(10.0, -5.0, 1.0)):
    return Trajectory(0, np.arange(n) * 0.1, np.tile(position, (n, 1)), np.tile(velocity, (n, 1)))


class Test_generate_trajectory:
    def test_deterministic(self):
        first = generate_trajectory(42, 20.0, 0.1)
        second = generate_trajectory(42, 20.0, 0.1)
        np.testing.assert_array_equal(first.positions, second.positions)
        np.testing.assert_array_equal(first.velocities, second.velocities)
        assert not np.array_equal(first.positions, generate_trajectory(43, 20.0, 0.1).positions)

    def test_sampling_grid(self):
        traj = generate_trajectory(0, 60.0, 0.1)
        assert len(traj) == 601
        assert traj.duration == pytest.approx(60.0)
        assert traj.states.shape == (601, 6)
        np.testing.assert_array_equal(traj.states[:, [0, 2, 4]], traj.positions)

    @pytest.mark.parametrize("seed", range(5))
    def test_kinematic_bounds(self, seed):
        params = TrajectoryParams(v_max=25.0, a_max=5.0)
        traj = generate_trajectory(seed, 120.0, 0.1, params)
        assert np.all(np.linalg.norm(traj.velocities, axis=1) <= params.v_max * (1 + 1e-9))
        accel = (traj.positions[2:] - 2 * traj.positions[1:-1] + traj.positions[:-2]) / 0.1 ** 2
        assert np.all(np.linalg.norm(accel, axis=1) <= params.a_max * (1 + 1e-6))

    def test_start_geometry(self, origin):
        params = TrajectoryParams()
        for seed in range(10):
            p0 = generate_trajectory(seed, 1.0, 0.5, params, sensor=origin).positions[0]
            assert params.range_min - 1e-6 <= np.linalg.norm(p0) <= params.range_max + 1e-6
            assert params.altitude_min <= p0[2] <= params.altitude_max

    def test_straight_line(self):
        traj = generate_trajectory(7, 30.0, 0.5, TrajectoryParams(curvature=0.0))
        np.testing.assert_array_equal(traj.velocities, np.broadcast_to(traj.velocities[0], traj.velocities.shape))
        np.testing.assert_allclose(traj.positions, traj.positions[0] + traj.velocities[0] * traj.times[:, None],
                                   rtol=1e-12)

    def test_invalid_arguments(self):
        with pytest.raises(DatasetError):
            generate_trajectory(0, 0.0, 0.1)
        with pytest.raises(DatasetError):
            generate_trajectory(0, 10.0, -0.1)
        with pytest.raises(DatasetError):
            generate_trajectory(0, 10.0, 0.1, TrajectoryParams(v_max=-1.0))
        with pytest.raises(DatasetError):
            generate_trajectory(0, 10.0, 0.1, TrajectoryParams(altitude_max=5000.0, range_min=3000.0))

    def test_cv_trajectory(self):
        traj = generate_cv_trajectory(1, 50, 0.5, 0.0)
        np.testing.assert_array_equal(traj.states[0], [5000.0, -20.0, 3000.0, 20.0, 500.0, 1.0])
        np.testing.assert_allclose(traj.positions[-1], traj.positions[0] + 24.5 * traj.velocities[0])
        with pytest.raises(DatasetError):
            generate_cv_trajectory(1, 0, 0.5, 1.0)


class Test_Trajectory:
    def test_rejects_bad_timestamps(self):
        with pytest.raises(DatasetError):
            Trajectory(0, [0.0, 1.0, 1.0], np.zeros((3, 3)), np.zeros((3, 3)))

    def test_rejects_ragged_and_empty(self):
        with pytest.raises(DatasetError):
            Trajectory(0, [0.0, 1.0], np.zeros((3, 3)), np.zeros((2, 3)))
        with pytest.raises(DatasetError):
            Trajectory(0, [], np.zeros((0, 3)), np.zeros((0, 3)))

    def test_rejects_non_finite(self):
        positions = np.zeros((2, 3))
        positions[1, 2] = np.inf
        with pytest.raises(DatasetError):
            Trajectory(0, [0.0, 1.0], positions, np.zeros((2, 3)))


class Test_simulate_measurements:
    @pytest.mark.parametrize("tier,row", [
        ("low", (1.0, 0.01, 0.001, 0.001)),
        ("medium", (10.0, 0.1, 0.01, 0.01)),
        ("high", (100.0, 1.0, 0.1, 0.1)),
    ])
    def test_tier_table(self, tier, row):
        sigmas = tier_sigmas(tier)
        assert sigmas.range == row[0]
        assert sigmas.range_rate == row[1]
        assert sigmas.bearing == pytest.approx(np.radians(row[2]), rel=1e-15)
        assert sigmas.elevation == pytest.approx(np.radians(row[3]), rel=1e-15)

    def test_unknown_tier(self):
        with pytest.raises(DatasetError):
            tier_sigmas("extreme")

    def test_noise_free(self, origin):
        traj = generate_trajectory(3, 10.0, 0.1)
        seq = simulate_measurements(traj, origin, "high", seed=1, add_noise=False)
        np.testing.assert_array_equal(seq.values, spherical_from_cartesian(traj.positions, traj.velocities, origin))
        assert seq.tier == "high"
        assert seq.sigmas == NOISE_TIERS["high"]

    def test_custom_sigmas(self, origin):
        traj = generate_trajectory(3, 2.0, 0.5)
        seq = simulate_measurements(traj, origin, NoiseSigmas(2.0, 0.2, 1e-3, 1e-3), seed=1)
        assert seq.tier == "custom"

    @pytest.mark.parametrize("tier", list(NOISE_TIERS))
    def test_empirical_sigmas(self, tier, origin):
        traj = _static_track(100_000)
        clean = spherical_from_cartesian(traj.positions, traj.velocities, origin)
        seq = simulate_measurements(traj, origin, tier, seed=9)
        resid = seq.values - clean
        resid[:, 1] = np.angle(np.exp(1j * resid[:, 1]))
        np.testing.assert_allclose(resid.std(axis=0), NOISE_TIERS[tier].as_vector(), rtol=0.02)

    def test_seeded(self, origin):
        traj = generate_trajectory(3, 5.0, 0.1)
        first = simulate_measurements(traj, origin, "medium", seed=5)
        np.testing.assert_array_equal(first.values, simulate_measurements(traj, origin, "medium", seed=5).values)
        assert not np.array_equal(first.values, simulate_measurements(traj, origin, "medium", seed=6).values)

    def test_angles_stay_in_range(self, origin):
        n = 2000
        positions = np.column_stack([np.full(n, -3000.0), np.zeros(n), np.full(n, 10.0)])
        traj = Trajectory(0, np.arange(n) * 0.1, positions, np.zeros((n, 3)))
        seq = simulate_measurements(traj, origin, "high", seed=4)
        assert np.all(seq.values[:, 1] > -np.pi) and np.all(seq.values[:, 1] <= np.pi)
        assert np.all(np.abs(seq.values[:, 2]) <= np.pi / 2)
        measurement, sigmas = next(iter(seq))
        assert isinstance(measurement, SphericalMeasurement)
        assert sigmas == NOISE_TIERS["high"]

    def test_elevation_reflects_over_the_pole(self, origin):
        n = 20_000
        positions = np.tile([100.0, 0.0, 3000.0], (n, 1))
        traj = Trajectory(0, np.arange(n) * 0.1, positions, np.zeros((n, 3)))
        clean = spherical_from_cartesian(positions[:1], np.zeros((1, 3)), origin)[0]
        sigmas = NoiseSigmas(1.0, 0.1, 1e-6, 0.2)
        exact = simulate_measurements(traj, origin, sigmas, seed=3, add_noise=False)
        seq = simulate_measurements(traj, origin, sigmas, seed=3)
        np.testing.assert_array_equal(exact.values, np.tile(clean, (n, 1)))
        elevation, bearing = seq.values[:, 2], seq.values[:, 1]
        assert np.all(np.abs(elevation) < np.pi / 2)
        flipped = np.abs(np.angle(np.exp(1j * (bearing - clean[1])))) > np.pi / 2
        assert 0.2 < flipped.mean() < 0.5
        # angular error is the elevation draw itself, median 0.6745 sigma
        direction = np.column_stack([np.cos(elevation) * np.cos(bearing),
                                     np.cos(elevation) * np.sin(bearing),
                                     np.sin(elevation)])
        angle = np.arccos(np.clip(direction @ (positions[0] / np.linalg.norm(positions[0])), -1.0, 1.0))
        assert np.median(angle) == pytest.approx(0.2 * 0.6745, rel=0.1)

    def test_sensor_coincidence(self):
        traj = _static_track(3, position=(0.0, 0.0, 0.0))
        with pytest.raises(GeometryError):
            simulate_measurements(traj, SensorPose(), "low", seed=0)


class Test_downsample:
    def _sequence(self, n, origin):
        return simulate_measurements(_static_track(n), origin, "low", seed=0)

    def test_full_rate_is_identity(self, origin):
        seq = self._sequence(30, origin)
        kept = downsample(seq, 1.0, seed=3)
        np.testing.assert_array_equal(kept.values, seq.values)
        np.testing.assert_array_equal(kept.indices, np.arange(30))

    def test_half_rate(self, origin):
        kept = downsample(self._sequence(100, origin), 0.5, seed=3)
        assert len(kept) == 50
        assert kept.rate == 0.5
        assert kept.indices[0] == 0 and kept.indices[1] == 1
        assert np.all(np.diff(kept.indices) > 0)
        np.testing.assert_array_equal(kept.times, np.arange(100)[kept.indices] * 0.1)

    def test_seeded(self, origin):
        seq = self._sequence(100, origin)
        np.testing.assert_array_equal(downsample(seq, 0.75, 8).indices, downsample(seq, 0.75, 8).indices)
        assert not np.array_equal(downsample(seq, 0.75, 8).indices, downsample(seq, 0.75, 9).indices)

    @pytest.mark.parametrize("n,rate,expected", [(600, 0.75, 450), (601, 0.5, 301), (5, 0.5, 3), (4, 0.1, 2)])
    def test_retained_count(self, n, rate, expected):
        assert retained_count(n, rate) == expected

    def test_invalid(self, origin):
        with pytest.raises(DatasetError):
            downsample(self._sequence(3, origin), 0.5, 0)
        with pytest.raises(DatasetError):
            downsample(self._sequence(10, origin), 0.0, 0)
        with pytest.raises(DatasetError):
            downsample(self._sequence(10, origin), 1.5, 0)


class Test_build_supervised:
    def test_pair_count(self, origin):
        traj = generate_trajectory(1, 5.0, 0.1)
        seq = simulate_measurements(traj, origin, "medium", seed=2)
        pairs = build_supervised(seq, traj).pairs()
        assert len(pairs) == len(seq) - 1
        assert pairs.features.shape == (len(seq) - 1, 12)
        np.testing.assert_array_equal(pairs.step, np.arange(len(seq) - 1))

    def test_noise_free_geometry(self, origin):
        traj = generate_trajectory(1, 10.0, 0.1)
        seq = downsample(simulate_measurements(traj, origin, "low", seed=2, add_noise=False), 0.5, 4)
        pairs = build_supervised(seq, traj).pairs()
        recovered = cartesian_from_spherical(pairs.features[:, 4], pairs.features[:, 5], pairs.features[:, 6], origin)
        np.testing.assert_allclose(recovered, pairs.targets, rtol=0, atol=1e-9)
        np.testing.assert_array_equal(pairs.targets, traj.positions[seq.indices[1:]])

    def test_sigmas_constant(self):
        pairs = _dataset(3, tier="high").pairs()
        np.testing.assert_array_equal(pairs.features[:, 8:], np.broadcast_to(NOISE_TIERS["high"].as_vector(),
                                                                              (len(pairs), 4)))

    def test_pairs_stay_inside_sequences(self):
        data = _dataset(2, rates=(1.0, 0.5))
        pairs = data.pairs()
        expected = sum(len(rows) - 1 for _, rows in data.sequences())
        assert len(pairs) == expected
        assert np.count_nonzero(pairs.step == 0) == len(list(data.sequences()))
        assert sorted(set(pairs.rates)) == [0.5, 1.0]

    def test_unordered_rows(self):
        data = _dataset(1)
        shuffled = SupervisedDataset(data.frame.iloc[::-1])
        with pytest.raises(DatasetError):
            shuffled.pairs()

    def test_mismatched_inputs(self, origin):
        traj = generate_trajectory(1, 2.0, 0.5, traj_id=4)
        seq = simulate_measurements(traj, origin, "low", seed=0)
        with pytest.raises(DatasetError):
            build_supervised(seq, generate_trajectory(1, 2.0, 0.5, traj_id=5))
        single = MeasurementSequence(4, "low", 1.0, 0, seq.times[:1], seq.values[:1], seq.sigmas)
        with pytest.raises(DatasetError):
            build_supervised(single, traj)


class Test_truth_at:
    def test_interpolates_constant_velocity(self):
        traj = generate_cv_trajectory(0, 20, 1.0, 0.0)
        times = np.array([0.0, 2.5, 7.25, 19.0])
        expected = traj.positions[0] + traj.velocities[0] * times[:, None]
        np.testing.assert_allclose(truth_at(traj, times), expected, rtol=1e-10)

    def test_outside(self):
        traj = generate_cv_trajectory(0, 5, 1.0, 0.0)
        with pytest.raises(DatasetError):
            truth_at(traj, [4.5, 5.5])


class Test_assign_folds:
    def test_ten_trajectories(self):
        data = assign_folds(_dataset(10), k=5, seed=1)
        per_fold = data.frame.groupby("fold")["traj_id"].nunique()
        assert per_fold.to_dict() == {k: 2 for k in range(5)}

    def test_partition(self):
        data = assign_folds(_dataset(13, rates=(1.0, 0.75)), k=5, seed=2)
        assert data.frame.groupby("traj_id")["fold"].nunique().max() == 1
        sizes = data.frame.groupby("fold")["traj_id"].nunique()
        assert sizes.sum() == 13
        assert sizes.max() - sizes.min() <= 1
        held, rest = data.select_folds([3]), data.select_folds([3], exclude=True)
        assert len(held) + len(rest) == len(data)
        assert not set(held.trajectory_ids) & set(rest.trajectory_ids)

    def test_seeded(self):
        data = _dataset(10)
        assert assign_folds(data, 5, 3) == assign_folds(data, 5, 3)
        assert assign_folds(data, 5, 3) != assign_folds(data, 5, 4)

    def test_too_few_trajectories(self):
        with pytest.raises(DatasetError):
            assign_folds(_dataset(3), k=5)


class Test_io:
    def test_dataset_round_trip(self, tmp_path):
        data = assign_folds(_dataset(5, rates=(1.0, 0.5)), k=5, seed=0)
        loaded = read_dataset(write_dataset(data, tmp_path / "dataset.csv"))
        assert loaded == data
        assert list(loaded.frame.columns) == DATASET_COLUMNS

    def test_pipeline_bytes(self, tmp_path):
        a = write_dataset(assign_folds(_dataset(5), 5, 0), tmp_path / "a.csv")
        b = write_dataset(assign_folds(_dataset(5), 5, 0), tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()
        assert b"\r\n" not in a.read_bytes()

    def test_unknown_column(self, tmp_path):
        frame = _dataset(1).frame.assign(bogus=1.0)
        path = write_csv(frame, tmp_path / "extra.csv")
        with pytest.raises(SchemaError) as e:
            read_dataset(path)
        assert e.value.column == "bogus"
        assert "bogus" in str(e.value)

    def test_missing_column(self, tmp_path):
        path = write_csv(_dataset(1).frame.drop(columns=["tz"]), tmp_path / "missing.csv")
        with pytest.raises(SchemaError) as e:
            read_dataset(path)
        assert e.value.column == "tz"

    def test_unparsable_column(self, tmp_path):
        frame = _dataset(1).frame.astype({"traj_id": str})
        frame.loc[0, "traj_id"] = "abc"
        path = write_csv(frame, tmp_path / "bad.csv")
        with pytest.raises(SchemaError) as e:
            read_dataset(path)
        assert e.value.column == "traj_id"

    def test_trajectory_golden_file(self, tmp_path):
        text = (
            "traj_id,t,x,y,z,vx,vy,vz\n"
            "3,0,1000,2000,300,10,-5,0.5\n"
            "3,0.5,1005,1997.5,300.25,10,-5,0.5\n"
            "7,0,-400,100,50,0,1.25,0\n"
            "7,2,-400,102.5,50,0,1.25,0\n"
        )
        source = tmp_path / "flights.csv"
        source.write_bytes(text.encode("utf-8"))
        trajectories = read_trajectories(source)
        assert [t.traj_id for t in trajectories] == [3, 7]
        np.testing.assert_array_equal(trajectories[1].positions[1], [-400.0, 102.5, 50.0])
        copy = write_trajectories(trajectories, tmp_path / "copy.csv")
        assert copy.read_bytes() == text.encode("utf-8")

    def test_interleaved_trajectories(self, tmp_path):
        source = tmp_path / "flights.csv"
        source.write_text(
            "traj_id,t,x,y,z,vx,vy,vz\n"
            "1,0,1,2,3,0,0,0\n"
            "2,0,5,5,5,0,0,0\n"
            "1,1,1,2,3,0,0,0\n"
        )
        trajectories = read_trajectories(source)
        assert [len(t) for t in trajectories] == [2, 1]

    def test_trajectory_round_trip(self, tmp_path):
        trajectories = [generate_trajectory(s, 3.0, 0.1, traj_id=s) for s in range(3)]
        loaded = read_trajectories(write_trajectories(trajectories, tmp_path / "t.csv"))
        for original, copy in zip(trajectories, loaded):
            np.testing.assert_array_equal(copy.positions, original.positions)
            np.testing.assert_array_equal(copy.velocities, original.velocities)
            np.testing.assert_array_equal(copy.times, original.times)

    def test_measurement_round_trip(self, tmp_path, origin):
        traj = generate_trajectory(2, 3.0, 0.1)
        seq = downsample(simulate_measurements(traj, origin, "medium", seed=1), 0.75, 2)
        (loaded,) = read_measurements(write_measurements([seq], tmp_path / "m.csv"))
        np.testing.assert_array_equal(loaded.values, seq.values)
        np.testing.assert_array_equal(loaded.times, seq.times)
        assert loaded.sigmas == seq.sigmas
        assert (loaded.tier, loaded.rate) == ("medium", 0.75)

    def test_empty_trajectory_file(self, tmp_path):
        source = tmp_path / "empty.csv"
        source.write_text("traj_id,t,x,y,z,vx,vy,vz\n")
        with pytest.raises(DatasetError):
            read_trajectories(source)

    def test_manifest(self, tmp_path):
        data = {"manifest_id": "abc", "generate": {"seeds": {"trajectory": [1, 2]}}}
        path = write_manifest(data, tmp_path / "manifest.yaml")
        assert read_manifest(path) == data
        assert read_manifest(tmp_path / "absent.yaml") == {}

    def test_empty_concat(self):
        empty = SupervisedDataset.concat([])
        assert len(empty) == 0
        assert isinstance(empty.frame, pd.DataFrame)
