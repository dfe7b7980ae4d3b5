import numpy as np
import pytest

from humanaware.model import (
    Dataset,
    MixtureComponent,
    ModelParams,
    ObservationSequence,
    Standardization,
)
from humanaware.synth import ScenarioConfig, default_true_params, sample_observations, simulate_flyby


def random_params(rng, k=2):
    """A random valid parameter set, spread widely enough to exercise both states."""
    a = rng.uniform(0.2, 1.0, size=(2, 2))
    a /= a.sum(axis=1, keepdims=True)
    pi1 = rng.uniform(0.2, 1.0, size=2)
    pi1 /= pi1.sum()
    c = rng.uniform(0.2, 1.0, size=k)
    c /= c.sum()
    mixture = [
        MixtureComponent(float(c[i]), float(rng.uniform(-1.5, 1.5)),
                         float(rng.uniform(0.05, 0.8)))
        for i in range(k)
    ]
    return ModelParams(
        beta=rng.normal(0.0, 0.3, size=25),
        sigma_sq=float(rng.uniform(0.05, 0.5)),
        pi1=pi1,
        A=a,
        mixture=mixture,
    )


def random_sequence(rng, n, subject="s00"):
    return ObservationSequence(
        features=rng.normal(0.0, 1.0, size=(n, 8)),
        targets=rng.normal(0.0, 1.0, size=n),
        subject_id=subject,
    )


def make_dataset(rng, n_sequences=3, n=40):
    seqs = [random_sequence(rng, n, f"s{i:02d}") for i in range(n_sequences)]
    return Dataset(seqs, Standardization.identity())


@pytest.fixture(scope="session")
def synth_dataset():
    """A small mixed-state dataset with ground truth, shared across tests."""
    config = ScenarioConfig(n_sequences=6, events_per_sequence=2, seed=11)
    trajectories = simulate_flyby(config)
    theta_true = default_true_params(2)
    dataset, truth = sample_observations(trajectories, theta_true, seed=12)
    return dataset, truth
