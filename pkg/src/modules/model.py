"""
Model Module
============

Likelihoods and priors of the spherical factor model and of the Euclidean
probit baseline, plus prior-predictive simulation of the vote probabilities.
"""

import hashlib
import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

import config
from modules import distributions as dist
from modules.errors import DimensionMismatchError, DomainError
from modules.geometry import spherical_to_cartesian

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class VoteMatrix:
    """I x J binary observations with an explicit observed-cell mask"""
    y: np.ndarray
    observed: np.ndarray
    subject_ids: list = None
    item_ids: list = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.y.ndim != 2 or self.y.shape != self.observed.shape:
            raise DimensionMismatchError("Vote matrix and mask must be 2-D with equal shapes")
        if self.y.shape[0] < 1 or self.y.shape[1] < 1:
            raise DomainError("A vote matrix needs at least one subject and one item")
        # missing cells are stored as 0 so arithmetic never touches NaN
        self.y = np.where(self.observed, self.y, 0.0)
        values = self.y[self.observed]
        if np.any((values != 0.0) & (values != 1.0)):
            raise DomainError("Observed votes must be 0 or 1")
        if self.subject_ids is None:
            self.subject_ids = [f"S{i + 1}" for i in range(self.y.shape[0])]
        if self.item_ids is None:
            self.item_ids = [f"V{j + 1}" for j in range(self.y.shape[1])]
        self.subject_ids = [str(s) for s in self.subject_ids]
        self.item_ids = [str(v) for v in self.item_ids]

    @classmethod
    def from_array(cls, values, subject_ids=None, item_ids=None):
        """Build from an array where NaN marks a missing vote"""
        values = np.asarray(values, dtype=float)
        observed = ~np.isnan(values)
        return cls(np.nan_to_num(values, nan=0.0), observed, subject_ids, item_ids)

    @property
    def n_subjects(self):
        return self.y.shape[0]

    @property
    def n_items(self):
        return self.y.shape[1]

    @property
    def n_missing(self):
        return int(np.count_nonzero(~self.observed))

    def as_array(self):
        """Votes with NaN in missing cells"""
        return np.where(self.observed, self.y, np.nan)

    def data_hash(self):
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.y).tobytes())
        digest.update(np.ascontiguousarray(self.observed).tobytes())
        return digest.hexdigest()

    def subset(self, rows=None, cols=None):
        rows = np.arange(self.n_subjects) if rows is None else np.asarray(rows)
        cols = np.arange(self.n_items) if cols is None else np.asarray(cols)
        return VoteMatrix(
            self.y[np.ix_(rows, cols)], self.observed[np.ix_(rows, cols)],
            [self.subject_ids[r] for r in rows], [self.item_ids[c] for c in cols],
        )


@dataclass
class LatentConfiguration:
    """Subject (beta) and item (psi, zeta) positions on S^K, one unit vector per row"""
    beta: np.ndarray
    psi: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.psi = np.atleast_2d(np.asarray(self.psi, dtype=float))
        self.zeta = np.atleast_2d(np.asarray(self.zeta, dtype=float))
        d = self.beta.shape[1]
        if self.psi.shape[1] != d or self.zeta.shape[1] != d:
            raise DimensionMismatchError("beta, psi and zeta must share the dimension K+1")
        if self.psi.shape != self.zeta.shape:
            raise DimensionMismatchError("psi and zeta must have one row per item")
        if d < 2:
            raise DimensionMismatchError("Positions need at least 2 Cartesian coordinates")

    @property
    def K(self):
        return self.beta.shape[1] - 1

    def check_unit(self, tol=config.UNIT_NORM_TOL):
        for name in ('beta', 'psi', 'zeta'):
            norms = np.linalg.norm(getattr(self, name), axis=1)
            if np.any(np.abs(norms - 1.0) > tol):
                raise DomainError(f"{name} rows are not unit vectors")

    def copy(self):
        return LatentConfiguration(self.beta.copy(), self.psi.copy(), self.zeta.copy())

    def rotate(self, R):
        """Apply the orthogonal matrix R to every position (x -> R x)"""
        return LatentConfiguration(self.beta @ R.T, self.psi @ R.T, self.zeta @ R.T)


@dataclass
class Hyperparams:
    omega: float
    tau: float
    kappa: np.ndarray
    lam: float

    def __post_init__(self):
        self.kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))

    def copy(self):
        return Hyperparams(self.omega, self.tau, self.kappa.copy(), self.lam)


@dataclass
class EuclideanParams:
    """Probit factor model parameters; sigma_j is fixed to 1"""
    mu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if self.alpha.shape[0] != self.mu.size or self.alpha.shape[1] != self.beta.shape[1]:
            raise DimensionMismatchError("Euclidean parameter shapes are inconsistent")


# ---------------------------------------------------------------------------
# Spherical likelihood
# ---------------------------------------------------------------------------

def _squared_distance(a, b):
    return np.arccos(np.clip(a @ b.T, -1.0, 1.0)) ** 2


def compute_e(psi_j, zeta_j, beta_i):
    """e = rho(zeta, beta)^2 - rho(psi, beta)^2, in [-pi^2, pi^2]"""
    psi_j, zeta_j, beta_i = (np.asarray(v, dtype=float) for v in (psi_j, zeta_j, beta_i))
    if not psi_j.shape[-1] == zeta_j.shape[-1] == beta_i.shape[-1]:
        raise DimensionMismatchError("compute_e needs vectors of equal dimension")
    d_zeta = np.arccos(np.clip(np.sum(zeta_j * beta_i, axis=-1), -1.0, 1.0))
    d_psi = np.arccos(np.clip(np.sum(psi_j * beta_i, axis=-1), -1.0, 1.0))
    return d_zeta ** 2 - d_psi ** 2


def e_matrix(latent):
    """I x J matrix of e values"""
    return _squared_distance(latent.beta, latent.zeta) - _squared_distance(latent.beta, latent.psi)


def theta(i, j, latent, hp):
    """Probability that subject i votes 1 on item j"""
    e = compute_e(latent.psi[j], latent.zeta[j], latent.beta[i])
    return float(dist.link_cdf(e, hp.kappa[j]))


def theta_matrix(latent, hp, counter=None):
    return dist.link_cdf(e_matrix(latent), hp.kappa[None, :], counter=counter)


def _floored_log(p, observed, counter):
    low = observed & (p < config.THETA_FLOOR)
    if np.any(low):
        n_low = int(np.count_nonzero(low))
        # only tracked evaluations (chain states) warn; trial points log at debug level
        if counter is not None:
            counter.theta_floored += n_low
            logger.warning(f"{n_low} vote probabilities floored at {config.THETA_FLOOR}")
        else:
            logger.debug(f"{n_low} vote probabilities floored at {config.THETA_FLOOR}")
    return np.log(np.maximum(p, config.THETA_FLOOR))


def loglik_cells(Y, latent, hp, counter=None):
    """Per-cell log-likelihood contributions; missing cells are 0"""
    _check_data(Y, latent, hp)
    e = e_matrix(latent)
    kappa = hp.kappa[None, :]
    # 1 - G(e) is evaluated as G(-e) to keep precision when theta is near 1
    p1 = dist.link_cdf(e, kappa, counter=counter)
    p0 = dist.link_cdf(-e, kappa)
    obs = Y.observed
    ll = np.where(Y.y == 1.0, _floored_log(p1, obs & (Y.y == 1.0), counter),
                  _floored_log(p0, obs & (Y.y == 0.0), counter))
    return np.where(obs, ll, 0.0)


def spherical_log_likelihood(Y, latent, hp, counter=None):
    """Bernoulli log-likelihood summed over the observed cells"""
    return float(np.sum(loglik_cells(Y, latent, hp, counter)))


def _check_data(Y, latent, hp):
    if latent.beta.shape[0] != Y.n_subjects or latent.psi.shape[0] != Y.n_items:
        raise DimensionMismatchError(
            f"Configuration is {latent.beta.shape[0]}x{latent.psi.shape[0]}, "
            f"data is {Y.n_subjects}x{Y.n_items}"
        )
    if hp.kappa.size != Y.n_items:
        raise DimensionMismatchError("One link concentration per item is required")


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------

def log_prior_latent(latent, hp):
    """SvM(omega, 4 omega, ..., K^2 omega) on each beta_i; SvM(tau, ..., K^2 tau) on psi_j and zeta_j"""
    K = latent.K
    subject_prec = dist.svm_precisions(hp.omega, K)
    item_prec = dist.svm_precisions(hp.tau, K)
    return float(
        np.sum(dist.svm_log_density_hausdorff(latent.beta, subject_prec))
        + np.sum(dist.svm_log_density_hausdorff(latent.psi, item_prec))
        + np.sum(dist.svm_log_density_hausdorff(latent.zeta, item_prec))
    )


def log_hyperprior(hp, cfg):
    """
    omega ~ Gam(a_omega, b_omega), tau ~ Gam(a_tau, b_tau),
    kappa_j ~ Gam(c, lambda), lambda ~ Gam(a_lambda, b_lambda); all rates.
    """
    if hp.omega <= 0 or hp.tau <= 0 or hp.lam <= 0 or np.any(hp.kappa <= 0):
        return -np.inf
    return float(
        dist.gamma_log_density(hp.omega, cfg.a_omega, cfg.b_omega)
        + dist.gamma_log_density(hp.tau, cfg.a_tau, cfg.b_tau)
        + np.sum(dist.gamma_log_density(hp.kappa, cfg.c, hp.lam))
        + dist.gamma_log_density(hp.lam, cfg.a_lambda, cfg.b_lambda)
    )


def log_posterior(Y, latent, hp, cfg, counter=None):
    return (spherical_log_likelihood(Y, latent, hp, counter)
            + log_prior_latent(latent, hp) + log_hyperprior(hp, cfg))


def sample_prior_positions(n, K, scale, rng):
    """n independent draws from SvM(scale, 4 scale, ..., K^2 scale), as unit vectors"""
    phi = dist.svm_sample(dist.svm_precisions(scale, K), rng, size=n)
    return spherical_to_cartesian(phi)


def sample_prior_configuration(I, J, K, omega, tau, rng):
    return LatentConfiguration(
        beta=sample_prior_positions(I, K, omega, rng),
        psi=sample_prior_positions(J, K, tau, rng),
        zeta=sample_prior_positions(J, K, tau, rng),
    )


def prior_predictive_theta(K, cfg, n, rng, omega=None, tau=None, kappa=None):
    """
    Draw n values of theta_{i,j} from the prior.

    Hyperparameters come from the Gamma hyperpriors unless fixed through the
    `omega`, `tau` and `kappa` keywords.
    """
    if n < 1:
        raise DomainError("prior_predictive_theta needs n >= 1")
    scale = np.arange(1, K + 1, dtype=float) ** 2

    om = np.full(n, omega, dtype=float) if omega is not None else rng.gamma(cfg.a_omega, 1.0 / cfg.b_omega, n)
    ta = np.full(n, tau, dtype=float) if tau is not None else rng.gamma(cfg.a_tau, 1.0 / cfg.b_tau, n)
    if kappa is not None:
        ka = np.full(n, kappa, dtype=float)
    else:
        lam = rng.gamma(cfg.a_lambda, 1.0 / cfg.b_lambda, n)
        ka = rng.gamma(cfg.c, 1.0 / lam)

    beta = spherical_to_cartesian(dist.svm_sample_batch(om[:, None] * scale, rng))
    psi = spherical_to_cartesian(dist.svm_sample_batch(ta[:, None] * scale, rng))
    zeta = spherical_to_cartesian(dist.svm_sample_batch(ta[:, None] * scale, rng))
    return dist.link_cdf(compute_e(psi, zeta, beta), ka)


# ---------------------------------------------------------------------------
# Euclidean probit baseline
# ---------------------------------------------------------------------------

def euclidean_prior_variances(K):
    """Prior variances (mu, alpha, beta_k): 1/2, 1/2 and 6 / (pi k)^2"""
    k = np.arange(1, K + 1, dtype=float)
    return 0.5, 0.5, 6.0 / (np.pi * k) ** 2


def euclidean_prior_z_variance(K):
    """Var(mu + alpha'beta) under the baseline prior; tends to 1 as K grows"""
    _, var_alpha, var_beta = euclidean_prior_variances(K)
    return 0.5 + float(np.sum(var_alpha * var_beta))


def euclidean_linear_predictor(params):
    return params.mu[None, :] + params.beta @ params.alpha.T


def euclidean_theta_matrix(params):
    return special.ndtr(euclidean_linear_predictor(params))


def euclidean_probit_log_likelihood(Y, params):
    """Bernoulli log-likelihood with theta = Phi(mu_j + alpha_j' beta_i)"""
    if params.beta.shape[0] != Y.n_subjects or params.mu.size != Y.n_items:
        raise DimensionMismatchError("Euclidean parameters do not match the data shape")
    eta = euclidean_linear_predictor(params)
    ll = np.where(Y.y == 1.0, special.log_ndtr(eta), special.log_ndtr(-eta))
    return float(np.sum(np.where(Y.observed, ll, 0.0)))


def sample_euclidean_prior(I, J, K, rng):
    var_mu, var_alpha, var_beta = euclidean_prior_variances(K)
    return EuclideanParams(
        mu=rng.normal(0.0, np.sqrt(var_mu), J),
        alpha=rng.normal(0.0, np.sqrt(var_alpha), (J, K)),
        beta=rng.normal(0.0, 1.0, (I, K)) * np.sqrt(var_beta),
    )


def utilities_to_bilinear(psi, zeta):
    """
    Euclidean quadratic-utility items as a bilinear model with sigma_j = 1:
    ||b - zeta||^2 - ||b - psi||^2 = mu + alpha'b with alpha = 2 (psi - zeta)
    and mu = zeta'zeta - psi'psi.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    alpha = 2.0 * (psi - zeta)
    mu = np.sum(zeta ** 2, axis=1) - np.sum(psi ** 2, axis=1)
    return mu, alpha
