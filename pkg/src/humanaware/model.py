"""Core types of the latent-attention arousal model.

The observation model is a two-state gated emission: when the human is
attentive, the arousal target follows a polynomial regression of the robot's
kinematic features plus Gaussian noise; when distracted, it is an independent
Gaussian-mixture random source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEATURE_NAMES = ("d", "d_dot", "x", "y", "z", "x_dot", "y_dot", "z_dot")
N_FEATURES = 8

# Per-coordinate monomials up to cubic, plus a bias term.
BASIS_DEGREE = 3
BASIS_SIZE = 1 + N_FEATURES * BASIS_DEGREE  # 25

ATTENTIVE = 0
DISTRACTED = 1

VARIANCE_FLOOR = 1e-6

_LOG_2PI = float(np.log(2.0 * np.pi))


def basis_index(dim: int, power: int) -> int:
    """Column of the monomial ``x[dim]**power`` in the basis vector (power 1..3)."""
    if not 0 <= dim < N_FEATURES:
        raise ValueError(f"feature dimension {dim} out of range")
    if not 1 <= power <= BASIS_DEGREE:
        raise ValueError(f"power {power} out of range 1..{BASIS_DEGREE}")
    return 1 + dim * BASIS_DEGREE + (power - 1)


@dataclass
class FeatureVector:
    """Robot kinematics relative to the human at one time step (SI units).

    Field order is fixed: [d, d_dot, x, y, z, x_dot, y_dot, z_dot].
    """

    d: float
    d_dot: float
    x: float
    y: float
    z: float
    x_dot: float
    y_dot: float
    z_dot: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.d, self.d_dot, self.x, self.y, self.z,
             self.x_dot, self.y_dot, self.z_dot],
            dtype=float,
        )

    @staticmethod
    def from_array(values) -> "FeatureVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got shape {values.shape}")
        return FeatureVector(*values)


@dataclass
class Standardization:
    """Per-dimension affine feature scaling applied before basis expansion."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.scale = np.asarray(self.scale, dtype=float)
        if self.mean.shape != (N_FEATURES,) or self.scale.shape != (N_FEATURES,):
            raise ValueError("standardization must cover all 8 feature dimensions")
        if np.any(self.scale <= 0.0):
            raise ValueError("standardization scale entries must be positive")

    @staticmethod
    def identity() -> "Standardization":
        return Standardization(np.zeros(N_FEATURES), np.ones(N_FEATURES))

    @staticmethod
    def from_features(features: np.ndarray) -> "Standardization":
        """Z-score parameters of a pooled (N, 8) feature block.

        Constant dimensions get unit scale so standardized values collapse to
        exactly zero instead of dividing by zero.
        """
        features = np.asarray(features, dtype=float)
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        constant = scale <= 1e-9
        # Snap constant dimensions so they standardize to exactly zero.
        mean = np.where(constant, features[0], mean)
        scale = np.where(constant, 1.0, scale)
        return Standardization(mean, scale)

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) / self.scale


@dataclass
class MixtureComponent:
    """One Gaussian component of the distracted-state random source."""

    weight: float
    mean: float
    variance: float


@dataclass
class ModelParams:
    """Full parameter set of the latent-attention model.

    beta: regression coefficients over the 25-term basis.
    sigma_sq: variance of the attentive emission noise.
    pi1: initial distribution over (attentive, distracted).
    A: 2x2 state transition matrix, rows sum to one.
    mixture: Gaussian mixture of the distracted emission.

    Construction does not validate; use :func:`validate_params`.
    """

    beta: np.ndarray
    sigma_sq: float
    pi1: np.ndarray
    A: np.ndarray
    mixture: list[MixtureComponent]

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.pi1 = np.asarray(self.pi1, dtype=float)
        self.A = np.asarray(self.A, dtype=float)

    @property
    def k(self) -> int:
        return len(self.mixture)

    def mixture_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Mixture parameters as (weights, means, variances) arrays."""
        c = np.array([m.weight for m in self.mixture], dtype=float)
        mu = np.array([m.mean for m in self.mixture], dtype=float)
        var = np.array([m.variance for m in self.mixture], dtype=float)
        return c, mu, var


@dataclass
class ObservationSequence:
    """One subject's time-aligned features and arousal targets."""

    features: np.ndarray
    targets: np.ndarray
    subject_id: str
    times: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.ndim != 2 or self.features.shape[1] != N_FEATURES:
            raise ValueError("features must have shape (N, 8)")
        if self.targets.shape != (self.features.shape[0],):
            raise ValueError("features and targets must have equal length")
        if len(self.targets) < 1:
            raise ValueError("sequence must contain at least one sample")
        if not np.all(np.isfinite(self.targets)):
            raise ValueError(f"non-finite target in sequence {self.subject_id!r}")
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float)
            if self.times.shape != self.targets.shape:
                raise ValueError("times must align with targets")

    def __len__(self) -> int:
        return len(self.targets)


@dataclass
class Dataset:
    """Sequences sharing one feature standardization."""

    sequences: list[ObservationSequence]
    feature_standardization: Standardization

    @property
    def n_samples(self) -> int:
        return sum(len(s) for s in self.sequences)

    def pooled_targets(self) -> np.ndarray:
        return np.concatenate([s.targets for s in self.sequences])


def basis_eval(x, standardization: Standardization) -> np.ndarray:
    """Polynomial feature basis phi(x): bias plus per-coordinate monomials to cubic.

    Accepts a FeatureVector or a raw length-8 array; returns a length-25 vector.
    """
    if isinstance(x, FeatureVector):
        x = x.as_array()
    x = np.asarray(x, dtype=float)
    if x.shape != (N_FEATURES,):
        raise ValueError(f"expected {N_FEATURES} features, got shape {x.shape}")
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"non-finite feature {FEATURE_NAMES[i]!r} (index {i}): {x[i]}")
    return basis_matrix(x[None, :], standardization)[0]


def basis_matrix(features: np.ndarray, standardization: Standardization) -> np.ndarray:
    """Design matrix of basis_eval over an (N, 8) feature block; shape (N, 25)."""
    z = standardization.apply(features)
    n = z.shape[0]
    out = np.empty((n, BASIS_SIZE))
    out[:, 0] = 1.0
    for p in range(1, BASIS_DEGREE + 1):
        out[:, p::BASIS_DEGREE][:, :N_FEATURES] = z**p
    return out


def predict_arousal(beta: np.ndarray, x, standardization: Standardization) -> float:
    """Arousal prediction f(x) = beta . phi(x)."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (BASIS_SIZE,):
        raise ValueError(f"beta must have length {BASIS_SIZE}, got {beta.shape}")
    return float(beta @ basis_eval(x, standardization))


@dataclass
class ArousalModel:
    """A fitted predictor: regression coefficients plus the feature scaling."""

    beta: np.ndarray
    standardization: Standardization

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.shape != (BASIS_SIZE,):
            raise ValueError(f"beta must have length {BASIS_SIZE}")

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Predictions over an (N, 8) feature block."""
        return basis_matrix(features, self.standardization) @ self.beta

    def predict_one(self, x) -> float:
        return predict_arousal(self.beta, x, self.standardization)


def kinematic_features(positions: np.ndarray, velocities: np.ndarray,
                       human_position: np.ndarray) -> np.ndarray:
    """Feature rows [d, d_dot, position, velocity] for (N, 3) kinematics.

    The range rate is the radial velocity component; at zero range it falls
    back to the speed magnitude.
    """
    positions = np.asarray(positions, dtype=float)
    velocities = np.asarray(velocities, dtype=float)
    rel = positions - np.asarray(human_position, dtype=float)
    d = np.linalg.norm(rel, axis=1)
    speed = np.linalg.norm(velocities, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        d_dot = np.einsum("ij,ij->i", rel, velocities) / d
    d_dot = np.where(d > 0.0, d_dot, speed)
    return np.column_stack([d, d_dot, positions, velocities])


def gaussian_pdf(y, mean, variance):
    return np.exp(-0.5 * (y - mean) ** 2 / variance) / np.sqrt(2.0 * np.pi * variance)


def emission_density(theta: ModelParams, y: float, x, standardization: Standardization,
                     state: int) -> float:
    """Per-state emission density p(y | state, x).

    Attentive: Gaussian about the regression prediction. Distracted: mixture
    density, independent of x and beta.
    """
    if state == ATTENTIVE:
        resid = y - predict_arousal(theta.beta, x, standardization)
        return float(gaussian_pdf(resid, 0.0, theta.sigma_sq))
    if state == DISTRACTED:
        c, mu, var = theta.mixture_arrays()
        return float(np.sum(c * gaussian_pdf(y, mu, var)))
    raise ValueError(f"invalid state tag {state!r}; use ATTENTIVE (0) or DISTRACTED (1)")


def emission_log_densities(theta: ModelParams, basis: np.ndarray,
                           targets: np.ndarray) -> np.ndarray:
    """Log emission densities for a whole sequence; shape (N, 2).

    Column 0 is the attentive regression density, column 1 the distracted
    mixture density (log-sum-exp over components).
    """
    resid = targets - basis @ theta.beta
    out = np.empty((len(targets), 2))
    c, mu, var = theta.mixture_arrays()
    with np.errstate(divide="ignore", over="ignore"):
        out[:, ATTENTIVE] = -0.5 * (_LOG_2PI + np.log(theta.sigma_sq)
                                    + resid**2 / theta.sigma_sq)
        lw = (np.log(c) - 0.5 * (_LOG_2PI + np.log(var))
              - 0.5 * (targets[:, None] - mu) ** 2 / var)
    m = lw.max(axis=1)
    finite = m > -np.inf
    out[:, DISTRACTED] = -np.inf
    if np.any(finite):
        lw_f = lw[finite] - m[finite, None]
        out[finite, DISTRACTED] = m[finite] + np.log(np.exp(lw_f).sum(axis=1))
    return out


def validate_params(theta: ModelParams) -> list[str]:
    """Check every ModelParams invariant; returns all violations (empty if valid)."""
    violations: list[str] = []
    if theta.beta.shape != (BASIS_SIZE,):
        violations.append(f"beta has length {theta.beta.size}, expected {BASIS_SIZE}")
    elif not np.all(np.isfinite(theta.beta)):
        violations.append("beta contains non-finite entries")
    if not np.isfinite(theta.sigma_sq) or theta.sigma_sq < VARIANCE_FLOOR:
        violations.append(f"variance below floor: sigma_sq = {theta.sigma_sq}")
    if theta.pi1.shape != (2,):
        violations.append("pi1 must have 2 entries")
    else:
        if np.any(theta.pi1 < 0):
            violations.append("pi1 has negative entries")
        if abs(theta.pi1.sum() - 1.0) > 1e-9:
            violations.append(f"pi1 sums to {theta.pi1.sum()}")
    if theta.A.shape != (2, 2):
        violations.append("A must be 2x2")
    else:
        if np.any(theta.A < 0):
            violations.append("A has negative entries")
        for i, row_sum in enumerate(theta.A.sum(axis=1)):
            if abs(row_sum - 1.0) > 1e-9:
                violations.append(f"row {i + 1} sums to {row_sum}")
    if len(theta.mixture) < 1:
        violations.append("mixture must have at least one component")
    else:
        c, mu, var = theta.mixture_arrays()
        if np.any(c < 0):
            violations.append("mixture weights have negative entries")
        if abs(c.sum() - 1.0) > 1e-9:
            violations.append(f"mixture weights sum to {c.sum()}")
        if not np.all(np.isfinite(mu)):
            violations.append("mixture means contain non-finite entries")
        for k, v in enumerate(var):
            if not np.isfinite(v) or v < VARIANCE_FLOOR:
                violations.append(f"variance below floor: component {k} sigma_k_sq = {v}")
    return violations


def require_valid(theta: ModelParams) -> None:
    """Raise ValueError listing all invariant violations, if any."""
    violations = validate_params(theta)
    if violations:
        raise ValueError("invalid model parameters: " + "; ".join(violations))
