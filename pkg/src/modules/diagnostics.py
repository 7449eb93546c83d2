"""
Diagnostics Module
==================

Model comparison and convergence checks: DIC, in-sample accuracy, a
great-subsphere principal nested spheres decomposition, Gelman-Rubin, and
Monte Carlo studies of the prior on theta.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, special
from scipy.linalg import null_space
from sklearn.neighbors import KernelDensity

import config
from modules import distributions as dist
from modules import model
from modules.errors import DomainError, IncompatibleChainsError
from modules.postprocess import align, posterior_mean_positions
from modules.sampler import ChainOutput

logger = logging.getLogger(__name__)


@dataclass
class DicReport:
    """DIC = l(posterior mean theta) - 2 Var(l); higher is better"""
    dic: float
    fit_term: float
    complexity_term: float

    def to_dict(self):
        return asdict(self)


@dataclass
class PnsReport:
    """Variance fractions by nested dimension; entry 0 is the final circle"""
    fractions: np.ndarray
    variances: np.ndarray
    converged: list = field(default_factory=list)

    @property
    def all_converged(self):
        return all(self.converged)

    def to_dict(self):
        return {'fractions': self.fractions.tolist(), 'variances': self.variances.tolist(),
                'converged': list(self.converged)}


# ---------------------------------------------------------------------------
# Fit measures
# ---------------------------------------------------------------------------

def chain_theta_mean(chain):
    """Element-wise posterior mean of the theta matrix"""
    if chain.n_samples == 0:
        raise DomainError("Chain has no samples")
    total = None
    for s in range(chain.n_samples):
        if chain.model == 'spherical':
            th = model.theta_matrix(chain.latent(s), chain.hyperparams(s))
        else:
            th = model.euclidean_theta_matrix(chain.euclidean_params(s))
        total = th if total is None else total + th
    return total / chain.n_samples


def theta_log_likelihood(Y, theta):
    """Bernoulli log-likelihood of a fixed probability matrix over observed cells"""
    p1 = np.maximum(theta, config.THETA_FLOOR)
    p0 = np.maximum(1.0 - theta, config.THETA_FLOOR)
    ll = np.where(Y.y == 1.0, np.log(p1), np.log(p0))
    return float(np.sum(np.where(Y.observed, ll, 0.0)))


def _check_chain_data(chain, Y):
    if chain.data_hash and chain.data_hash != Y.data_hash():
        raise IncompatibleChainsError("Chain was fitted to a different vote matrix")


def dic(chain, Y):
    """
    fit = log-likelihood at the posterior mean theta, complexity = 2 x sample
    variance (n - 1 denominator) of the per-sample log-likelihood.
    """
    if chain.n_samples < 2:
        raise DomainError("DIC needs at least 2 samples")
    _check_chain_data(chain, Y)
    fit = theta_log_likelihood(Y, chain_theta_mean(chain))
    complexity = 2.0 * float(np.var(chain.loglik, ddof=1))
    return DicReport(dic=fit - complexity, fit_term=fit, complexity_term=complexity)


def in_sample_accuracy(chain, Y, theta_mean=None):
    """Share of observed cells where (posterior mean theta >= 0.5) matches the vote"""
    _check_chain_data(chain, Y)
    theta_mean = chain_theta_mean(chain) if theta_mean is None else theta_mean
    predicted = np.where(theta_mean >= 0.5, config.ACCURACY_TIE_PREDICTS, 0)
    n_obs = int(np.count_nonzero(Y.observed))
    if n_obs == 0:
        return 0.0
    return float(np.count_nonzero((predicted == Y.y) & Y.observed) / n_obs)


# ---------------------------------------------------------------------------
# Principal nested spheres (great subspheres only)
# ---------------------------------------------------------------------------

def _fit_great_subsphere(points):
    """Unit normal minimizing the mean squared geodesic distance to {x : n'x = 0}"""
    _, vecs = np.linalg.eigh(points.T @ points)
    start = vecs[:, 0]

    def objective(v):
        n = v / np.linalg.norm(v)
        return float(np.mean(np.arcsin(np.clip(points @ n, -1.0, 1.0)) ** 2))

    result = optimize.minimize(objective, start, method='BFGS')
    normal = result.x / np.linalg.norm(result.x)
    residual = objective(normal)
    if objective(start) < residual:
        normal, residual = start, objective(start)
    return normal, residual, bool(result.success)


def _frechet_circle(angles):
    """Frechet mean and variance of angles on the unit circle"""
    def spread(mu):
        d = (angles - mu + np.pi) % (2.0 * np.pi) - np.pi
        return float(np.mean(d ** 2))

    grid = np.linspace(-np.pi, np.pi, 73)
    best = grid[int(np.argmin([spread(g) for g in grid]))]
    step = 2.0 * np.pi / 72
    result = optimize.minimize_scalar(spread, bounds=(best - step, best + step), method='bounded')
    return float(result.x), spread(result.x), bool(result.success)


def pns_great_decomposition(points):
    """
    Sequentially fit great subspheres S^K -> S^{K-1} -> ... -> S^1 and record
    the residual variance at each level; the last level is the Frechet
    variance on the circle. Fractions are ordered from the circle (dimension 1)
    upward and sum to 1.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    K = x.shape[1] - 1
    if K < 1:
        raise DomainError("Points must lie on S^K with K >= 1")
    if x.shape[0] < K + 2:
        raise DomainError(f"PNS on S^{K} needs at least {K + 2} points")

    residuals, converged = [], []
    current = x / np.linalg.norm(x, axis=1, keepdims=True)
    while current.shape[1] > 2:
        normal, residual, ok = _fit_great_subsphere(current)
        residuals.append(residual)
        converged.append(ok)
        projected = current - np.outer(current @ normal, normal)
        norms = np.linalg.norm(projected, axis=1, keepdims=True)
        projected = projected / np.where(norms > 0, norms, 1.0)
        basis = null_space(normal[None, :])
        current = projected @ basis

    angles = np.arctan2(current[:, 1], current[:, 0])
    _, circle_var, ok = _frechet_circle(angles)
    converged.append(ok)

    variances = np.array([circle_var] + residuals[::-1])
    total = variances.sum()
    fractions = variances / total if total > 0 else np.full(variances.size, 1.0 / variances.size)
    if not all(converged):
        logger.warning("PNS optimizer did not converge at every level")
    return PnsReport(fractions=fractions, variances=variances, converged=converged)


# ---------------------------------------------------------------------------
# Convergence
# ---------------------------------------------------------------------------

def psrf(chains):
    """Potential scale reduction factor for an (nchains, length) array"""
    nchains, length = chains.shape
    W = np.mean(np.var(chains, axis=1, ddof=1))
    means = np.mean(chains, axis=1)
    B = (length / (nchains - 1.0)) * np.sum((means - means.mean()) ** 2)
    if W == 0:
        return 1.0 if B == 0 else np.inf
    V = W * ((length - 1.0) / length) + B * ((nchains + 1.0) / (length * nchains))
    return float(np.sqrt(V / W))


def gelman_rubin(traces):
    """PSRF of the log-likelihood across chains, never below 1"""
    if len(traces) < 2:
        raise DomainError("Gelman-Rubin needs at least 2 chains")
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise DomainError("Gelman-Rubin needs equal-length traces")
    if lengths.pop() < 2:
        raise DomainError("Gelman-Rubin needs at least 2 draws per chain")
    return max(1.0, psrf(np.vstack([np.asarray(t, dtype=float) for t in traces])))


# ---------------------------------------------------------------------------
# Prior studies
# ---------------------------------------------------------------------------

def _vmf_theta(K, omega, tau, kappa, n, rng):
    pole = np.zeros(K + 1)
    pole[0] = 1.0
    beta = dist.vmf_sample(pole, omega, rng, size=n)
    psi = dist.vmf_sample(pole, tau, rng, size=n)
    zeta = dist.vmf_sample(pole, tau, rng, size=n)
    return dist.link_cdf(model.compute_e(psi, zeta, beta), kappa)


def _euclidean_theta(K, n, rng):
    var_mu, var_alpha, var_beta = model.euclidean_prior_variances(K)
    mu = rng.normal(0.0, np.sqrt(var_mu), n)
    alpha = rng.normal(0.0, np.sqrt(var_alpha), (n, K))
    beta = rng.normal(0.0, 1.0, (n, K)) * np.sqrt(var_beta)
    return special.ndtr(mu + np.sum(alpha * beta, axis=1))


def _variance_se(values):
    centered = values - values.mean()
    m2 = np.mean(centered ** 2)
    m4 = np.mean(centered ** 4)
    return float(np.sqrt(max(m4 - m2 ** 2, 0.0) / values.size))


def prior_variance_study(prior, K_list, omega, tau, kappa, n, rng):
    """
    Monte Carlo mean and variance of theta under vMF(pole, omega / tau), the
    polynomial SvM priors or the Euclidean probit prior (omega, tau and kappa
    unused), for each K in K_list.
    """
    if prior not in ('vmf', 'svm', 'euclidean'):
        raise DomainError("prior must be 'vmf', 'svm' or 'euclidean'")
    if n < 2:
        raise DomainError("prior_variance_study needs n >= 2")
    cfg = dist.HyperpriorConfig()
    rows = []
    for K in K_list:
        if prior == 'vmf':
            th = _vmf_theta(K, omega, tau, kappa, n, rng)
        elif prior == 'euclidean':
            th = _euclidean_theta(K, n, rng)
        else:
            th = model.prior_predictive_theta(K, cfg, n, rng, omega=omega, tau=tau, kappa=kappa)
        rows.append({
            'prior': prior, 'omega': omega, 'tau': tau, 'kappa': kappa, 'K': K,
            'mean': float(th.mean()), 'mean_se': float(th.std(ddof=1) / np.sqrt(n)),
            'var': float(th.var(ddof=1)), 'var_se': _variance_se(th),
        })
    return pd.DataFrame(rows)


def theta_density_modes(theta_draws, bandwidth=0.02, grid_size=512, floor=0.01):
    """Number of local maxima of a Gaussian KDE of theta on [0, 1]"""
    draws = np.asarray(theta_draws, dtype=float).reshape(-1, 1)
    kde = KernelDensity(kernel='gaussian', bandwidth=bandwidth).fit(draws)
    grid = np.linspace(0.0, 1.0, grid_size)
    density = np.exp(kde.score_samples(grid[:, None]))
    peak = density.max()
    interior = (density[1:-1] > density[:-2]) & (density[1:-1] >= density[2:])
    interior &= density[1:-1] > floor * peak
    modes = int(np.count_nonzero(interior))
    modes += int(density[0] > density[1] and density[0] > floor * peak)
    modes += int(density[-1] > density[-2] and density[-1] > floor * peak)
    return modes


def theta_histogram(theta_draws, bins=50):
    """Plot-ready density histogram of theta draws"""
    density, edges = np.histogram(theta_draws, bins=bins, range=(0.0, 1.0), density=True)
    return pd.DataFrame({'bin_left': edges[:-1], 'bin_right': edges[1:], 'density': density})


# ---------------------------------------------------------------------------
# Comparison tables
# ---------------------------------------------------------------------------

def model_metrics(chains, Y, pns=True):
    """
    Long-format rows (model, K, metric, value) for one group of chains fitted
    with the same model and K. Samples of all chains are pooled.
    """
    if not chains:
        raise DomainError("No chains supplied")
    first = chains[0]
    for ch in chains:
        if ch.model != first.model or ch.K != first.K:
            raise IncompatibleChainsError("Chains in one group must share model and K")
        _check_chain_data(ch, Y)
    pooled = pool_chains(chains)
    report = dic(pooled, Y)
    theta_mean = chain_theta_mean(pooled)
    rows = [
        ('dic', report.dic), ('dic_fit', report.fit_term),
        ('dic_complexity', report.complexity_term),
        ('accuracy', in_sample_accuracy(pooled, Y, theta_mean)),
    ]
    if len(chains) >= 2:
        n = min(ch.n_samples for ch in chains)
        rows.append(('rhat', gelman_rubin([ch.loglik[:n] for ch in chains])))
    if pns and first.model == 'spherical' and first.K >= 1:
        means = posterior_mean_positions(align(pooled)).beta
        if means.shape[0] >= first.K + 2:
            fractions = pns_great_decomposition(means).fractions
            rows.extend((f'pns_fraction_{k + 1}', f) for k, f in enumerate(fractions))
    return pd.DataFrame([{'model': first.model, 'K': first.K, 'metric': m, 'value': float(v)}
                         for m, v in rows])


def pool_chains(chains):
    """Concatenate the draws of several chains of the same model and K"""
    if len(chains) == 1:
        return chains[0]
    first = chains[0]
    samples = {name: np.concatenate([ch.samples[name] for ch in chains])
               for name in first.samples}
    return ChainOutput(
        model=first.model, K=first.K, samples=samples,
        loglik=np.concatenate([ch.loglik for ch in chains]), acceptance=dict(first.acceptance),
        seed=first.seed, config=first.config, incidents=first.incidents,
        data_hash=first.data_hash, subject_ids=first.subject_ids, item_ids=first.item_ids,
    )
