"""Fitting the latent-attention model: forward-backward recursions, EM, the
i.i.d.-Gaussian least-squares baseline, and likelihood-based model comparison.

The forward-backward pass runs in a scaled form (per-step normalization with
an accumulated log scale) that is mathematically identical to the raw
recursions but immune to underflow on long sequences.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.stats import chi2

from .model import (
    ATTENTIVE,
    BASIS_SIZE,
    DISTRACTED,
    VARIANCE_FLOOR,
    Dataset,
    MixtureComponent,
    ModelParams,
    ObservationSequence,
    Standardization,
    basis_matrix,
    emission_log_densities,
    gaussian_pdf,
    require_valid,
)


class EstimationError(RuntimeError):
    """Numerical failure inside an E or M step."""


@dataclass
class PosteriorTables:
    """Smoothed posteriors of one sequence under a fixed parameter set.

    gamma[n, i] = p(z_n = i | data); xi[m, i, j] = p(z_m = i, z_{m+1} = j | data);
    resp[n, k] = p(w_n = k | y_n); log_likelihood = log p(y | x, theta).
    """

    gamma: np.ndarray
    xi: np.ndarray
    resp: np.ndarray
    log_likelihood: float


@dataclass
class EmConfig:
    max_iters: int = 500
    rel_tol: float = 1e-8
    k: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.k < 1:
            raise ValueError("mixture size must be at least 1")


@dataclass
class FitReport:
    theta_star: ModelParams
    ll_trace: list[float]
    iterations: int
    converged: bool


@njit(cache=True, nogil=True)
def _fb_kernel(loge, pi1, A):  # pragma: no cover - exercised via forward_backward
    n_steps = loge.shape[0]
    gamma = np.empty((n_steps, 2))
    xi = np.empty((n_steps - 1, 2, 2))
    alpha = np.empty((n_steps, 2))
    beta = np.empty((n_steps, 2))
    scale = np.empty(n_steps)
    shift = np.empty(n_steps)
    e = np.empty((n_steps, 2))
    for n in range(n_steps):
        m = loge[n, 0] if loge[n, 0] > loge[n, 1] else loge[n, 1]
        if m == -np.inf:
            return gamma, xi, 0.0, n
        shift[n] = m
        e[n, 0] = np.exp(loge[n, 0] - m)
        e[n, 1] = np.exp(loge[n, 1] - m)

    a0 = pi1[0] * e[0, 0]
    a1 = pi1[1] * e[0, 1]
    c = a0 + a1
    if c == 0.0:
        return gamma, xi, 0.0, 0
    scale[0] = c
    alpha[0, 0] = a0 / c
    alpha[0, 1] = a1 / c
    for n in range(1, n_steps):
        p0 = alpha[n - 1, 0] * A[0, 0] + alpha[n - 1, 1] * A[1, 0]
        p1 = alpha[n - 1, 0] * A[0, 1] + alpha[n - 1, 1] * A[1, 1]
        a0 = p0 * e[n, 0]
        a1 = p1 * e[n, 1]
        c = a0 + a1
        if c == 0.0:
            return gamma, xi, 0.0, n
        scale[n] = c
        alpha[n, 0] = a0 / c
        alpha[n, 1] = a1 / c

    ll = 0.0
    for n in range(n_steps):
        ll += np.log(scale[n]) + shift[n]

    beta[n_steps - 1, 0] = 1.0
    beta[n_steps - 1, 1] = 1.0
    for n in range(n_steps - 2, -1, -1):
        eb0 = e[n + 1, 0] * beta[n + 1, 0]
        eb1 = e[n + 1, 1] * beta[n + 1, 1]
        beta[n, 0] = (A[0, 0] * eb0 + A[0, 1] * eb1) / scale[n + 1]
        beta[n, 1] = (A[1, 0] * eb0 + A[1, 1] * eb1) / scale[n + 1]

    for n in range(n_steps):
        gamma[n, 0] = alpha[n, 0] * beta[n, 0]
        gamma[n, 1] = alpha[n, 1] * beta[n, 1]
    for n in range(1, n_steps):
        for i in range(2):
            for j in range(2):
                xi[n - 1, i, j] = (alpha[n - 1, i] * A[i, j] * e[n, j]
                                   * beta[n, j] / scale[n])
    return gamma, xi, ll, -1


def _responsibility_table(theta: ModelParams, targets: np.ndarray) -> np.ndarray:
    """Mixture responsibilities p(w_n = k | y_n) for a target vector; (N, K)."""
    c, mu, var = theta.mixture_arrays()
    with np.errstate(divide="ignore", over="ignore"):
        lw = (np.log(c) - 0.5 * np.log(2.0 * np.pi * var)
              - 0.5 * (targets[:, None] - mu) ** 2 / var)
    m = lw.max(axis=1)
    out = np.full((len(targets), theta.k), 1.0 / theta.k)
    finite = m > -np.inf
    if not np.all(finite):
        warnings.warn("mixture densities underflowed for some targets; "
                      "using uniform responsibilities", RuntimeWarning)
    if np.any(finite):
        w = np.exp(lw[finite] - m[finite, None])
        out[finite] = w / w.sum(axis=1, keepdims=True)
    return out


def gmm_responsibilities(theta: ModelParams, y: float) -> np.ndarray:
    """Posterior component probabilities of the distracted source for one target."""
    require_valid(theta)
    return _responsibility_table(theta, np.array([float(y)]))[0]


def _forward_backward_raw(theta: ModelParams, basis: np.ndarray,
                          targets: np.ndarray) -> PosteriorTables:
    loge = emission_log_densities(theta, basis, targets)
    gamma, xi, ll, status = _fb_kernel(loge, theta.pi1, theta.A)
    if status >= 0:
        raise EstimationError(
            f"emission density underflowed to zero at step {status}; "
            "the parameter set is degenerate for this sequence")
    resp = _responsibility_table(theta, targets)
    return PosteriorTables(gamma=gamma, xi=xi, resp=resp, log_likelihood=float(ll))


def forward_backward(theta: ModelParams, seq: ObservationSequence,
                     standardization: Standardization,
                     basis: np.ndarray | None = None) -> PosteriorTables:
    """Smoothed state/transition posteriors and the sequence log-likelihood.

    Boundary conditions match the unscaled recursions: the forward variable
    starts from pi1 times the first emission and the backward variable ends
    at one.
    """
    require_valid(theta)
    if basis is None:
        basis = basis_matrix(seq.features, standardization)
    return _forward_backward_raw(theta, basis, seq.targets)


def brute_force_likelihood(theta: ModelParams, seq: ObservationSequence,
                           standardization: Standardization) -> float:
    """Likelihood p(y | x, theta) by explicit enumeration of all (z, w) paths.

    Exponential in the sequence length; guarded to 2^N * K^N <= 1e6. Used as
    the small-N oracle for the forward pass.
    """
    require_valid(theta)
    n = len(seq)
    k = theta.k
    if 2**n * k**n > 1_000_000:
        raise ValueError(f"enumeration of 2^{n} * {k}^{n} paths exceeds the guard")
    basis = basis_matrix(seq.features, standardization)
    preds = basis @ theta.beta
    y = seq.targets
    c, mu, var = theta.mixture_arrays()
    total = 0.0
    for z_path in itertools.product((ATTENTIVE, DISTRACTED), repeat=n):
        p_chain = theta.pi1[z_path[0]]
        for prev, cur in zip(z_path, z_path[1:]):
            p_chain *= theta.A[prev, cur]
        if p_chain == 0.0:
            continue
        for w_path in itertools.product(range(k), repeat=n):
            p = p_chain
            for step, (zi, wi) in enumerate(zip(z_path, w_path)):
                p *= c[wi]
                if zi == ATTENTIVE:
                    p *= gaussian_pdf(y[step] - preds[step], 0.0, theta.sigma_sq)
                else:
                    p *= gaussian_pdf(y[step], mu[wi], var[wi])
            total += p
    return total


def _solve_weighted_ls(basis: np.ndarray, targets: np.ndarray,
                       weights: np.ndarray) -> np.ndarray:
    """Weighted least squares with the minimum-norm convention.

    When the effective sample mass is below the coefficient count, a small
    ridge keeps the solution defined; otherwise a rank-revealing lstsq handles
    structurally constant basis columns (e.g. constant-altitude features).
    """
    if np.sum(weights) < BASIS_SIZE:
        g = (basis * weights[:, None]).T @ basis
        g[np.diag_indices_from(g)] += 1e-8
        rhs = basis.T @ (weights * targets)
        try:
            return np.linalg.solve(g, rhs)
        except np.linalg.LinAlgError as exc:
            raise EstimationError(
                "weighted normal equations are singular; posterior mass is "
                "all-distracted - reduce the basis or regularize") from exc
    sw = np.sqrt(weights)
    beta, _, _, _ = np.linalg.lstsq(basis * sw[:, None], targets * sw, rcond=None)
    if not np.all(np.isfinite(beta)):
        raise EstimationError(
            "weighted least squares produced non-finite coefficients; "
            "reduce the basis or regularize")
    return beta


def m_step(posteriors: list[PosteriorTables], dataset: Dataset,
           theta_old: ModelParams,
           bases: list[np.ndarray] | None = None) -> ModelParams:
    """Closed-form maximizers given the posteriors of every sequence.

    The initial distribution averages the first-step posteriors across
    sequences; transition counts, regression weights, and mixture statistics
    are pooled. Mixture weights use the marginal label posterior
    gamma_att * c_old + gamma_dis * resp, the exact expected label count
    under the gated emission, so the train likelihood never decreases.
    Zero-mass denominators retain the previous parameter value.
    """
    if len(posteriors) != len(dataset.sequences):
        raise ValueError("one posterior table per sequence is required")
    if bases is None:
        bases = [basis_matrix(s.features, dataset.feature_standardization)
                 for s in dataset.sequences]

    pi1 = np.mean([p.gamma[0] for p in posteriors], axis=0)
    pi1 = pi1 / pi1.sum()

    trans = np.zeros((2, 2))
    for p in posteriors:
        if len(p.xi):
            trans += p.xi.sum(axis=0)
    a_new = theta_old.A.copy()
    for i in range(2):
        row_sum = trans[i].sum()
        if row_sum > 0.0:
            a_new[i] = trans[i] / row_sum

    basis_all = np.vstack(bases)
    y_all = np.concatenate([s.targets for s in dataset.sequences])
    gamma_all = np.vstack([p.gamma for p in posteriors])
    resp_all = np.vstack([p.resp for p in posteriors])
    w_att = gamma_all[:, ATTENTIVE]

    beta = _solve_weighted_ls(basis_all, y_all, w_att)

    att_mass = w_att.sum()
    if att_mass > 0.0:
        resid = y_all - basis_all @ beta
        sigma_sq = max(float((w_att @ resid**2) / att_mass), VARIANCE_FLOOR)
    else:
        sigma_sq = theta_old.sigma_sq

    # Mixture-weight statistic: the marginal label posterior. Attentive steps
    # carry no label information, so they contribute the prior weights; this
    # keeps every EM iteration an exact ascent step.
    k = theta_old.k
    c_old, _, _ = theta_old.mixture_arrays()
    marg = (gamma_all[:, ATTENTIVE, None] * c_old
            + gamma_all[:, DISTRACTED, None] * resp_all)
    c_new = marg.sum(axis=0) / len(y_all)
    c_new = c_new / c_new.sum()
    joint = gamma_all[:, DISTRACTED, None] * resp_all
    mass = joint.sum(axis=0)
    mixture = []
    for j in range(k):
        if mass[j] > 0.0:
            mu_j = float((joint[:, j] @ y_all) / mass[j])
            var_j = max(float((joint[:, j] @ (y_all - mu_j) ** 2) / mass[j]),
                        VARIANCE_FLOOR)
        else:
            mu_j = theta_old.mixture[j].mean
            var_j = theta_old.mixture[j].variance
        mixture.append(MixtureComponent(float(c_new[j]), mu_j, var_j))

    return ModelParams(beta=beta, sigma_sq=sigma_sq, pi1=pi1, A=a_new,
                       mixture=mixture)


def em_fit(dataset: Dataset, theta0: ModelParams, config: EmConfig,
           threads: int = 1) -> FitReport:
    """Alternate posterior computation and closed-form maximization to a local MLE.

    Convergence is declared when the relative change of the total train
    log-likelihood falls below ``config.rel_tol``. The trace records the
    log-likelihood of the parameters entering each iteration and, on
    convergence, of the final ones; it is nondecreasing up to tiny slack.
    Per-sequence E steps are independent; ``threads`` > 1 runs them in a
    thread pool without changing any result.
    """
    require_valid(theta0)
    if not dataset.sequences:
        raise ValueError("dataset is empty")
    std = dataset.feature_standardization
    bases = [basis_matrix(s.features, std) for s in dataset.sequences]
    targets = [s.targets for s in dataset.sequences]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        pool = ThreadPoolExecutor(max_workers=threads)

        def e_step(theta):
            return list(pool.map(
                lambda bt: _forward_backward_raw(theta, bt[0], bt[1]),
                zip(bases, targets)))
    else:
        pool = None

        def e_step(theta):
            return [_forward_backward_raw(theta, b, y)
                    for b, y in zip(bases, targets)]

    theta = theta0
    ll_trace: list[float] = []
    converged = False
    iterations = 0
    try:
        for it in range(config.max_iters):
            try:
                posts = e_step(theta)
            except EstimationError as exc:
                raise EstimationError(
                    f"E step failed at iteration {it}: {exc}") from exc
            ll = float(sum(p.log_likelihood for p in posts))
            ll_trace.append(ll)
            if it > 0 and abs(ll - ll_trace[-2]) <= config.rel_tol * abs(ll_trace[-2]):
                converged = True
                break
            try:
                theta = m_step(posts, dataset, theta, bases=bases)
            except EstimationError as exc:
                raise EstimationError(
                    f"M step failed at iteration {it}: {exc}") from exc
            iterations = it + 1
    finally:
        if pool is not None:
            pool.shutdown()
    return FitReport(theta_star=theta, ll_trace=ll_trace,
                     iterations=iterations, converged=converged)


def default_init(dataset: Dataset, k: int, seed: int) -> ModelParams:
    """Initial parameters: least-squares regression start, maximally mixing
    chain, uniform mixture with unit spreads and means drawn from [-1, 1]."""
    if not dataset.sequences:
        raise ValueError("dataset is empty")
    if k < 1:
        raise ValueError("mixture size must be at least 1")
    beta, _ = mse_fit(dataset)
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-1.0, 1.0, size=k)
    mixture = [MixtureComponent(1.0 / k, float(m), 1.0) for m in mu]
    return ModelParams(
        beta=beta,
        sigma_sq=0.25,  # sigma0 = 0.5
        pi1=np.array([0.5, 0.5]),
        A=np.full((2, 2), 0.5),
        mixture=mixture,
    )


def mse_fit(dataset: Dataset) -> tuple[np.ndarray, float]:
    """Ordinary least squares and residual variance: the i.i.d.-Gaussian baseline.

    This is the special case of the latent model with the chain pinned to the
    attentive state. Rank-deficient designs (constant feature columns) get
    the deterministic minimum-norm solution, with a warning.
    """
    if not dataset.sequences:
        raise ValueError("dataset is empty")
    std = dataset.feature_standardization
    basis = np.vstack([basis_matrix(s.features, std) for s in dataset.sequences])
    y = dataset.pooled_targets()
    beta, _, rank, _ = np.linalg.lstsq(basis, y, rcond=None)
    if rank < BASIS_SIZE:
        warnings.warn(
            f"design matrix rank {rank} < {BASIS_SIZE}; "
            "returning the minimum-norm least-squares solution", RuntimeWarning)
    if not np.all(np.isfinite(beta)):
        raise EstimationError("least-squares fit produced non-finite coefficients")
    resid = y - basis @ beta
    return beta, float(np.mean(resid**2))


def baseline_params(beta: np.ndarray, sigma_sq: float) -> ModelParams:
    """Wrap a least-squares fit as a degenerate always-attentive parameter set.

    The distracted state is unreachable, so the mixture is a placeholder.
    """
    return ModelParams(
        beta=np.asarray(beta, dtype=float),
        sigma_sq=max(float(sigma_sq), VARIANCE_FLOOR),
        pi1=np.array([1.0, 0.0]),
        A=np.eye(2),
        mixture=[MixtureComponent(1.0, 0.0, 1.0)],
    )


def test_log_likelihood(theta: ModelParams, dataset: Dataset) -> float:
    """Total held-out log-likelihood: sum of forward-pass values per sequence."""
    require_valid(theta)
    std = dataset.feature_standardization
    total = 0.0
    for seq in dataset.sequences:
        tables = _forward_backward_raw(
            theta, basis_matrix(seq.features, std), seq.targets)
        total += tables.log_likelihood
    return total


@dataclass
class LrtResult:
    statistic: float
    dof: int
    alpha: float
    critical_value: float
    reject: bool


def likelihood_ratio_test(ll_proposed: float, ll_baseline: float,
                          extra_params: int = 10, alpha: float = 0.01,
                          tol: float = 1e-6) -> LrtResult:
    """Chi-square likelihood-ratio test of the latent model against the baseline.

    lambda = 2 (ll_proposed - ll_baseline); the null is rejected when lambda
    strictly exceeds the chi-square quantile at ``extra_params`` degrees of
    freedom. A statistic negative beyond ``tol`` indicates an upstream fit
    failure and raises.
    """
    if extra_params < 1:
        raise ValueError("degrees of freedom must be at least 1")
    statistic = 2.0 * (ll_proposed - ll_baseline)
    if statistic < -tol:
        raise ValueError(
            f"likelihood ratio statistic {statistic} is negative beyond tolerance; "
            "the proposed fit is worse than the baseline it nests")
    critical = float(chi2.ppf(1.0 - alpha, df=extra_params))
    return LrtResult(statistic=float(statistic), dof=extra_params, alpha=alpha,
                     critical_value=critical, reject=bool(statistic > critical))
