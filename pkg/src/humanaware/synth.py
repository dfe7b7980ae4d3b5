"""Synthetic fly-by sessions and observations drawn from the generative model.

A session strings together straight-corridor fly-by events around a seated
human at a three-way intersection, with parked pauses in between. Targets are
then sampled from the latent-attention model with known ground-truth states,
which makes estimator recovery directly checkable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    Dataset,
    MixtureComponent,
    ModelParams,
    ObservationSequence,
    Standardization,
    basis_index,
    basis_matrix,
    kinematic_features,
)

# The human sits at the junction; the flight altitude matches head height so
# distances are effectively planar.
HUMAN_POSITION = np.array([0.0, 0.0, 1.6])

# Planar waypoints of the three base corridor paths; each also runs reversed.
_BASE_TEMPLATES: dict[str, tuple[tuple[float, float], ...]] = {
    "forward_left": ((38.0, 0.0), (4.0, 0.0), (4.0, 22.0)),
    "forward_right": ((30.0, 1.5), (3.5, 1.5), (3.5, -20.0)),
    "left_right": ((2.5, 24.0), (4.5, 0.0), (2.5, -24.0)),
}

TEMPLATE_NAMES = tuple(_BASE_TEMPLATES) + tuple(
    name + "_rev" for name in _BASE_TEMPLATES)


def template_waypoints(name: str) -> np.ndarray:
    if name.endswith("_rev"):
        return np.asarray(_BASE_TEMPLATES[name[:-4]], dtype=float)[::-1].copy()
    return np.asarray(_BASE_TEMPLATES[name], dtype=float)


@dataclass
class ScenarioConfig:
    """Knobs of the session generator."""

    n_sequences: int = 12
    events_per_sequence: int = 4
    speed_range: tuple[float, float] = (1.5, 3.5)
    altitude: float = 1.6
    pause_range: tuple[float, float] = (2.0, 5.0)
    sample_rate: float = 10.0
    seed: int = 0
    samples_per_sequence: int | None = None

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.speed_range[0] <= 0 or self.speed_range[1] < self.speed_range[0]:
            raise ValueError("speed range must be positive and ordered")
        if self.n_sequences < 1 or self.events_per_sequence < 1:
            raise ValueError("need at least one sequence and one event")


@dataclass
class FeatureTrajectory:
    """Sampled robot kinematics of one session: times (N,) and features (N, 8)."""

    times: np.ndarray
    features: np.ndarray


@dataclass
class GroundTruth:
    """Latent traces aligned 1:1 with the generated samples."""

    z: list[np.ndarray]
    w: list[np.ndarray]
    theta_true: ModelParams


def _features_from_kinematics(positions: np.ndarray, velocities: np.ndarray) -> np.ndarray:
    return kinematic_features(positions, velocities, HUMAN_POSITION)


def _sample_event(waypoints: np.ndarray, speed: float, altitude: float,
                  rate: float) -> np.ndarray:
    """Constant-speed piecewise-linear fly-by sampled at the given rate."""
    seg = np.diff(waypoints, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    duration = cum[-1] / speed
    n = int(np.floor(duration * rate)) + 1
    t = np.arange(n) / rate
    s = np.minimum(speed * t, cum[-1])
    idx = np.minimum(np.searchsorted(cum, s, side="right") - 1, len(seg) - 1)
    frac = (s - cum[idx]) / seg_len[idx]
    planar = waypoints[idx] + frac[:, None] * seg[idx]
    positions = np.column_stack([planar, np.full(n, altitude)])
    direction = seg[idx] / seg_len[idx][:, None]
    velocities = np.column_stack([speed * direction, np.zeros(n)])
    return _features_from_kinematics(positions, velocities)


def _sample_pause(park_planar: np.ndarray, duration: float, altitude: float,
                  rate: float) -> np.ndarray:
    n = max(int(np.floor(duration * rate)), 1)
    positions = np.tile(np.append(park_planar, altitude), (n, 1))
    velocities = np.zeros((n, 3))
    return _features_from_kinematics(positions, velocities)


def simulate_flyby(config: ScenarioConfig) -> list[FeatureTrajectory]:
    """Deterministic (per seed) fly-by sessions at constant altitude.

    Each session alternates fly-by events with parked pauses at the next
    event's start point. When ``samples_per_sequence`` is set, events are
    appended until the target length is reached and the session is trimmed.
    """
    rng = np.random.default_rng(config.seed)
    sessions = []
    for _ in range(config.n_sequences):
        blocks: list[np.ndarray] = []
        total = 0
        event = 0

        def want_more() -> bool:
            if config.samples_per_sequence is not None:
                return total < config.samples_per_sequence
            return event < config.events_per_sequence

        while want_more():
            name = TEMPLATE_NAMES[rng.integers(len(TEMPLATE_NAMES))]
            waypoints = template_waypoints(name)
            speed = rng.uniform(*config.speed_range)
            if event > 0:
                pause = rng.uniform(*config.pause_range)
                block = _sample_pause(waypoints[0], pause, config.altitude,
                                      config.sample_rate)
                blocks.append(block)
                total += len(block)
            block = _sample_event(waypoints, speed, config.altitude,
                                  config.sample_rate)
            blocks.append(block)
            total += len(block)
            event += 1
        features = np.vstack(blocks)
        if config.samples_per_sequence is not None:
            features = features[: config.samples_per_sequence]
        times = np.arange(len(features)) / config.sample_rate
        sessions.append(FeatureTrajectory(times=times, features=features))
    return sessions


def default_true_params(k: int = 2) -> ModelParams:
    """Ground-truth parameters used by the recovery experiments.

    The regression is a sparse cubic in standardized distance and range rate:
    arousal rises as the robot gets close and as the closing speed grows.
    Defined in normalized target space, so no post-hoc target scaling is
    applied to sampled observations.
    """
    beta = np.zeros(25)
    beta[0] = 0.25
    beta[basis_index(0, 1)] = -0.55   # distance, linear
    beta[basis_index(0, 3)] = 0.06    # distance, cubic
    beta[basis_index(1, 1)] = -0.35   # range rate, linear
    mixtures = {
        1: [MixtureComponent(1.0, 1.2, 0.36)],
        2: [MixtureComponent(0.7, 0.0, 0.09), MixtureComponent(0.3, 1.5, 0.36)],
    }
    if k not in mixtures:
        raise ValueError(f"no default mixture of size {k}")
    return ModelParams(
        beta=beta,
        sigma_sq=0.09,  # sigma = 0.3
        pi1=np.array([0.8, 0.2]),
        A=np.array([[0.95, 0.05], [0.10, 0.90]]),
        mixture=mixtures[k],
    )


def sample_observations(trajectories: list[FeatureTrajectory],
                        theta_true: ModelParams,
                        seed: int) -> tuple[Dataset, GroundTruth]:
    """Draw targets from the generative model along the given trajectories.

    The attention state follows the Markov chain; attentive steps emit the
    regression prediction plus Gaussian noise, distracted steps emit from the
    mixture. The mixture label is drawn i.i.d. at every step (it only shapes
    the target when distracted), so both latent traces are fully recorded.
    """
    if not trajectories:
        raise ValueError("no trajectories to sample from")
    std = Standardization.from_features(
        np.vstack([t.features for t in trajectories]))
    rng = np.random.default_rng(seed)
    c, mu, var = theta_true.mixture_arrays()
    sd_mix = np.sqrt(var)
    sd_att = float(np.sqrt(theta_true.sigma_sq))

    sequences = []
    z_traces = []
    w_traces = []
    for idx, traj in enumerate(trajectories):
        n = len(traj.features)
        preds = basis_matrix(traj.features, std) @ theta_true.beta
        z = np.empty(n, dtype=np.int64)
        z[0] = rng.choice(2, p=theta_true.pi1)
        for step in range(1, n):
            z[step] = rng.choice(2, p=theta_true.A[z[step - 1]])
        w = rng.choice(theta_true.k, size=n, p=c)
        noise = rng.standard_normal(n)
        y = np.where(z == 0,
                     preds + sd_att * noise,
                     mu[w] + sd_mix[w] * noise)
        sequences.append(ObservationSequence(
            features=traj.features, targets=y,
            subject_id=f"s{idx:02d}", times=traj.times))
        z_traces.append(z)
        w_traces.append(w)
    dataset = Dataset(sequences=sequences, feature_standardization=std)
    return dataset, GroundTruth(z=z_traces, w=w_traces, theta_true=theta_true)


def split_dataset(dataset: Dataset, train_fraction: float,
                  seed: int) -> tuple[Dataset, Dataset]:
    """Partition by whole sequences into disjoint train/test datasets."""
    n = len(dataset.sequences)
    if n < 2:
        raise ValueError("need at least two sequences to split")
    n_train = int(round(train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise ValueError(
            f"train fraction {train_fraction} leaves an empty train or test split")
    order = np.random.default_rng(seed).permutation(n)
    train_idx = sorted(order[:n_train])
    test_idx = sorted(order[n_train:])
    std = dataset.feature_standardization
    train = Dataset([dataset.sequences[i] for i in train_idx], std)
    test = Dataset([dataset.sequences[i] for i in test_idx], std)
    return train, test
