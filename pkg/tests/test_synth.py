import numpy as np
import pytest

from humanaware.model import ModelParams, MixtureComponent
from humanaware.synth import (
    HUMAN_POSITION,
    FeatureTrajectory,
    ScenarioConfig,
    TEMPLATE_NAMES,
    default_true_params,
    sample_observations,
    simulate_flyby,
    split_dataset,
    template_waypoints,
    _sample_event,
)


def event_features(name, speed=2.0, rate=10.0):
    return _sample_event(template_waypoints(name), speed, 1.6, rate)


class TestSimulateFlyby:
    def test_six_templates(self):
        assert len(TEMPLATE_NAMES) == 6
        assert sum(n.endswith("_rev") for n in TEMPLATE_NAMES) == 3

    def test_head_on_approach_profile(self):
        feats = event_features("forward_left")
        d = feats[:, 0]
        closest = int(np.argmin(d))
        assert closest > 0
        assert np.all(np.diff(d[: closest + 1]) < 0)  # strictly decreasing
        assert np.all(feats[:closest, 1] < 0)  # approaching: negative range rate

    def test_reversed_template_mirrors_distance_profile(self):
        # length 56 m at 2 m/s and 10 Hz: 281 samples, exactly time-symmetric
        fwd = event_features("forward_left", speed=2.0, rate=10.0)
        rev = event_features("forward_left_rev", speed=2.0, rate=10.0)
        assert len(fwd) == len(rev)
        np.testing.assert_allclose(rev[:, 0], fwd[::-1, 0], atol=1e-9)

    @pytest.mark.parametrize("name", TEMPLATE_NAMES)
    def test_range_rate_matches_finite_differences(self, name):
        # fine time step so the centered-difference truncation error of the
        # curved d(t) profile is far below the tolerance
        feats = event_features(name, speed=2.0, rate=2000.0)
        d = feats[:, 0]
        d_dot = feats[:, 1]
        vel = feats[:, 5:8]
        fd = (d[2:] - d[:-2]) / (2 * (1.0 / 2000.0))
        # compare only where the velocity is constant across the stencil
        smooth = np.all((vel[2:] == vel[:-2]) & (vel[1:-1] == vel[:-2]), axis=1)
        assert smooth.sum() > 1000
        np.testing.assert_allclose(d_dot[1:-1][smooth], fd[smooth], atol=1e-6)

    def test_constant_altitude_and_distance_consistency(self):
        config = ScenarioConfig(n_sequences=1, events_per_sequence=3, seed=5)
        traj = simulate_flyby(config)[0]
        assert np.all(traj.features[:, 4] == 1.6)
        pos = traj.features[:, 2:5]
        d = np.linalg.norm(pos - HUMAN_POSITION, axis=1)
        np.testing.assert_allclose(traj.features[:, 0], d, atol=1e-9)

    def test_deterministic_per_seed(self):
        config = ScenarioConfig(n_sequences=2, events_per_sequence=2, seed=6)
        a = simulate_flyby(config)
        b = simulate_flyby(config)
        for ta, tb in zip(a, b):
            np.testing.assert_array_equal(ta.features, tb.features)

    def test_samples_per_sequence_trims_exactly(self):
        config = ScenarioConfig(n_sequences=3, events_per_sequence=1, seed=7,
                                samples_per_sequence=500)
        for traj in simulate_flyby(config):
            assert len(traj.features) == 500


class TestSampleObservations:
    def test_identity_chain_all_attentive(self):
        config = ScenarioConfig(n_sequences=2, events_per_sequence=2, seed=8)
        trajectories = simulate_flyby(config)
        theta = default_true_params(2)
        theta.pi1 = np.array([1.0, 0.0])
        theta.A = np.eye(2)
        dataset, truth = sample_observations(trajectories, theta, seed=9)
        assert all(np.all(z == 0) for z in truth.z)
        # residuals behave like N(0, sigma^2)
        from humanaware.model import basis_matrix

        resid = []
        for seq in dataset.sequences:
            preds = basis_matrix(seq.features,
                                 dataset.feature_standardization) @ theta.beta
            resid.append(seq.targets - preds)
        resid = np.concatenate(resid)
        sigma = np.sqrt(theta.sigma_sq)
        assert abs(resid.mean()) < 4 * sigma / np.sqrt(len(resid))
        assert abs(resid.std() / sigma - 1.0) < 0.1

    def test_pure_mixture_branch(self):
        config = ScenarioConfig(n_sequences=1, events_per_sequence=2, seed=10,
                                samples_per_sequence=4000)
        trajectories = simulate_flyby(config)
        theta = default_true_params(1)
        theta.pi1 = np.array([0.0, 1.0])
        theta.A = np.array([[0.5, 0.5], [0.0, 1.0]])
        dataset, truth = sample_observations(trajectories, theta, seed=11)
        assert np.all(truth.z[0] == 1)
        y = dataset.sequences[0].targets
        mu1 = theta.mixture[0].mean
        sd1 = np.sqrt(theta.mixture[0].variance)
        assert abs(y.mean() - mu1) <= 4 * sd1 / np.sqrt(len(y))

    def test_transition_frequencies_match_chain(self):
        n = 100_000
        dummy = FeatureTrajectory(times=np.arange(n) / 10.0,
                                  features=np.zeros((n, 8)))
        theta = default_true_params(1)
        dataset, truth = sample_observations([dummy], theta, seed=12)
        z = truth.z[0]
        for i in range(2):
            from_i = z[:-1] == i
            for j in range(2):
                freq = np.mean(z[1:][from_i] == j)
                assert abs(freq - theta.A[i, j]) < 0.01

    def test_attentive_residual_variance_within_ten_percent(self):
        config = ScenarioConfig(n_sequences=4, events_per_sequence=4, seed=13,
                                samples_per_sequence=4500)
        theta = default_true_params(2)
        dataset, truth = sample_observations(simulate_flyby(config), theta,
                                             seed=14)
        from humanaware.model import basis_matrix

        resid = []
        for seq, z in zip(dataset.sequences, truth.z):
            preds = basis_matrix(seq.features,
                                 dataset.feature_standardization) @ theta.beta
            resid.append((seq.targets - preds)[z == 0])
        resid = np.concatenate(resid)
        assert len(resid) >= 10_000
        assert abs(resid.var() / theta.sigma_sq - 1.0) < 0.1

    def test_traces_align_with_samples(self):
        config = ScenarioConfig(n_sequences=3, events_per_sequence=1, seed=15)
        dataset, truth = sample_observations(simulate_flyby(config),
                                             default_true_params(2), seed=16)
        for seq, z, w in zip(dataset.sequences, truth.z, truth.w):
            assert len(z) == len(w) == len(seq)


class TestSplitDataset:
    def _dataset(self, n):
        config = ScenarioConfig(n_sequences=n, events_per_sequence=1, seed=17,
                                samples_per_sequence=30)
        dataset, _ = sample_observations(simulate_flyby(config),
                                         default_true_params(2), seed=18)
        return dataset

    def test_fifty_six_sequences_split_38_18(self):
        dataset = self._dataset(56)
        train, test = split_dataset(dataset, 38 / 56, seed=0)
        assert len(train.sequences) == 38
        assert len(test.sequences) == 18

    def test_full_fraction_rejected(self):
        dataset = self._dataset(4)
        with pytest.raises(ValueError, match="empty"):
            split_dataset(dataset, 1.0, seed=0)

    def test_deterministic(self):
        dataset = self._dataset(10)
        a1, b1 = split_dataset(dataset, 0.6, seed=3)
        a2, b2 = split_dataset(dataset, 0.6, seed=3)
        assert [s.subject_id for s in a1.sequences] == [s.subject_id
                                                        for s in a2.sequences]
        assert [s.subject_id for s in b1.sequences] == [s.subject_id
                                                        for s in b2.sequences]

    def test_disjoint_and_exhaustive(self):
        dataset = self._dataset(9)
        train, test = split_dataset(dataset, 0.7, seed=4)
        ids_train = {s.subject_id for s in train.sequences}
        ids_test = {s.subject_id for s in test.sequences}
        assert not ids_train & ids_test
        assert ids_train | ids_test == {s.subject_id for s in dataset.sequences}
        assert train.feature_standardization is dataset.feature_standardization
