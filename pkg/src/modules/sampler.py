"""
Sampler Module
==============

Hybrid MCMC for the spherical factor model:

- Geodesic Hamiltonian Monte Carlo (GHMC) for the latent positions, run as
  three blocks (all beta_i, all psi_j, all zeta_j) whose rows are
  conditionally independent and accepted independently
- log-normal random-walk Metropolis-Hastings for omega, tau and each kappa_j
- a conjugate Gibbs draw for lambda

plus the Albert-Chib Gibbs sampler for the Euclidean probit baseline and
multi-chain orchestration.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import stats
from tqdm import tqdm

import config
from modules import distributions as dist
from modules import gradients as grads
from modules import model
from modules.errors import (
    DomainError,
    InitializationError,
    NumericalIncidentCounter,
    SingularCoordinateError,
)
from modules.geometry import geodesic_flow, renormalize, tangent_project

logger = logging.getLogger(__name__)

HYPER_NAMES = ('omega', 'tau', 'kappa', 'lam')


# ---------------------------------------------------------------------------
# Configuration objects
# ---------------------------------------------------------------------------

@dataclass
class GhmcConfig:
    """Step-size ranges, leapfrog range and jitter schedule for the GHMC blocks"""
    beta_eps_range: tuple = config.BETA_EPS_PRESETS[0]
    item_eps_range: tuple = config.ITEM_EPS_PRESETS[0]
    leap_range: tuple = config.LEAP_RANGE
    jitter_period: int = config.JITTER_PERIOD
    beta_eps_presets: list = field(default_factory=lambda: list(config.BETA_EPS_PRESETS))
    item_eps_presets: list = field(default_factory=lambda: list(config.ITEM_EPS_PRESETS))
    adapt_presets: bool = True

    def __post_init__(self):
        self.beta_eps_range = tuple(float(v) for v in self.beta_eps_range)
        self.item_eps_range = tuple(float(v) for v in self.item_eps_range)
        self.leap_range = tuple(int(v) for v in self.leap_range)
        self.beta_eps_presets = [tuple(float(v) for v in p) for p in self.beta_eps_presets]
        self.item_eps_presets = [tuple(float(v) for v in p) for p in self.item_eps_presets]
        for low, high in [self.beta_eps_range, self.item_eps_range,
                          *self.beta_eps_presets, *self.item_eps_presets]:
            if not 0 < low < high:
                raise DomainError(f"Step-size range must satisfy 0 < low < high, got ({low}, {high})")
        if not 1 <= self.leap_range[0] <= self.leap_range[1]:
            raise DomainError(f"Leapfrog range must satisfy 1 <= L_min <= L_max, got {self.leap_range}")
        if self.jitter_period < 1:
            raise DomainError("jitter_period must be at least 1")

    @classmethod
    def from_preset(cls, index):
        """Preset 0 uses the narrow step-size ranges, preset 1 the wide ones"""
        if index not in (0, 1):
            raise DomainError("GHMC preset must be 0 or 1")
        return cls(beta_eps_range=config.BETA_EPS_PRESETS[index],
                   item_eps_range=config.ITEM_EPS_PRESETS[index])

    def to_dict(self):
        return asdict(self)


@dataclass
class SamplerSettings:
    iterations: int = config.DEFAULT_ITERATIONS
    burn_in: int = config.DEFAULT_BURN_IN
    thin: int = config.DEFAULT_THIN
    progress: bool = False

    def __post_init__(self):
        if self.iterations < 0 or self.burn_in < 0:
            raise DomainError("iterations and burn_in must be nonnegative")
        if self.thin < 1:
            raise DomainError("thin must be at least 1")

    @property
    def kept(self):
        return math.ceil(self.iterations / self.thin)

    def to_dict(self):
        return asdict(self)


@dataclass
class MhState:
    """Log-scale proposal sd and acceptance counters for one (possibly vector) parameter"""
    log_sd: np.ndarray
    accepted: np.ndarray = None
    proposed: int = 0
    n_adapt: int = 0

    def __post_init__(self):
        self.log_sd = np.atleast_1d(np.asarray(self.log_sd, dtype=float))
        if self.accepted is None:
            self.accepted = np.zeros_like(self.log_sd)

    @classmethod
    def create(cls, size=1, sd=config.MH_INITIAL_SD):
        if sd <= 0:
            raise DomainError("Proposal sd must be positive")
        return cls(np.full(size, np.log(sd)))

    @property
    def sd(self):
        return np.exp(self.log_sd)

    def acceptance_rate(self):
        if self.proposed == 0:
            return np.zeros_like(self.accepted)
        return self.accepted / self.proposed

    def reset_counters(self):
        self.accepted = np.zeros_like(self.log_sd)
        self.proposed = 0

    def adapt(self, accept_prob):
        """Robbins-Monro step on log sd toward the target acceptance rate"""
        self.n_adapt += 1
        gain = self.n_adapt ** -config.MH_ADAPT_EXPONENT
        self.log_sd = self.log_sd + gain * (np.asarray(accept_prob) - config.MH_TARGET_ACCEPTANCE)


@dataclass
class ChainState:
    """One MCMC state: positions plus hyperparameters"""
    latent: model.LatentConfiguration
    hp: model.Hyperparams


@dataclass
class ChainOutput:
    """Posterior draws of one chain, kept after burn-in"""
    model: str
    K: int
    samples: dict
    loglik: np.ndarray
    acceptance: dict
    seed: int
    config: dict = field(default_factory=dict)
    incidents: dict = field(default_factory=dict)
    data_hash: str = ''
    subject_ids: list = field(default_factory=list)
    item_ids: list = field(default_factory=list)

    @property
    def n_samples(self):
        return int(self.loglik.shape[0])

    def latent(self, s):
        if self.model != 'spherical':
            raise DomainError("Latent configurations exist only for spherical chains")
        return model.LatentConfiguration(self.samples['beta'][s], self.samples['psi'][s],
                                         self.samples['zeta'][s])

    def hyperparams(self, s):
        return model.Hyperparams(float(self.samples['omega'][s]), float(self.samples['tau'][s]),
                                 self.samples['kappa'][s], float(self.samples['lam'][s]))

    def euclidean_params(self, s):
        if self.model != 'euclidean':
            raise DomainError("Euclidean parameters exist only for euclidean chains")
        return model.EuclideanParams(self.samples['mu'][s], self.samples['alpha'][s],
                                     self.samples['beta'][s])

    def last_state(self):
        """Final kept state, used to warm-start another run"""
        if self.n_samples == 0:
            raise DomainError("Chain has no samples")
        if self.model == 'euclidean':
            return self.euclidean_params(-1)
        return ChainState(self.latent(-1), self.hyperparams(-1))


# ---------------------------------------------------------------------------
# GHMC
# ---------------------------------------------------------------------------

def ghmc_trajectory(x, gamma, target, eps, L):
    """
    Integrate L geodesic leapfrog steps from (x, gamma).

    `target` maps an (n, d) array to (log density (n,), gradient (n, d)); the
    gradient may be unconstrained since every kick is tangent-projected.
    Returns (x, gamma, logp, H_start, H_end) for each row.
    """
    logp0, g = target(x)
    h_start = -logp0 + 0.5 * np.sum(gamma ** 2, axis=1)
    logp = logp0
    with np.errstate(invalid='ignore', over='ignore'):
        for _ in range(L):
            gamma = tangent_project(x, gamma + 0.5 * eps * g)
            x, gamma = geodesic_flow(x, gamma, eps)
            logp, g = target(x)
            gamma = tangent_project(x, gamma + 0.5 * eps * g)
        h_end = -logp + 0.5 * np.sum(gamma ** 2, axis=1)
    return x, gamma, logp, h_start, h_end


def ghmc_batch(x, target, eps, L, rng, counter=None):
    """
    One GHMC transition for every row of x, with independent accept/reject.

    Returns (new x, accepted mask). Rows whose trajectory produces a non-finite
    density or gradient are rejected and counted.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    gamma = tangent_project(x, rng.standard_normal(x.shape))
    x_prop, _, _, h_start, h_end = ghmc_trajectory(x, gamma, target, eps, L)
    u = rng.uniform(size=x.shape[0])

    finite = np.isfinite(h_end) & np.all(np.isfinite(x_prop), axis=1)
    if not np.all(finite):
        n_bad = int(np.count_nonzero(~finite))
        if counter is not None:
            counter.rejected_nonfinite += n_bad
        logger.warning(f"{n_bad} GHMC proposals rejected for non-finite density or gradient")
    with np.errstate(invalid='ignore', over='ignore'):
        log_ratio = np.where(finite, h_start - h_end, -np.inf)
    accepted = np.log(u) < log_ratio
    new_x = np.where(accepted[:, None], x_prop, x)
    new_x, drift = renormalize(new_x)
    if counter is not None and drift > config.RENORMALIZE_WARN:
        counter.renormalized += 1
    return new_x, accepted


def ghmc_update(x, target, eps, L, rng, counter=None):
    """Single-vector GHMC step; `target` maps (1, d) arrays to ((1,), (1, d))"""
    x = np.asarray(x, dtype=float)
    new_x, accepted = ghmc_batch(x[None, :], target, eps, L, rng, counter)
    return new_x[0], bool(accepted[0])


def _rowwise_prior(x, precisions):
    """Hausdorff log density and unconstrained gradient; singular rows become NaN"""
    try:
        return (dist.svm_log_density_hausdorff(x, precisions),
                grads.grad_prior_jacobian_unconstrained(x, precisions))
    except SingularCoordinateError:
        logp = np.full(x.shape[0], np.nan)
        g = np.full(x.shape, np.nan)
        for r in range(x.shape[0]):
            try:
                logp[r] = dist.svm_log_density_hausdorff(x[r], precisions)
                g[r] = grads.grad_prior_jacobian_unconstrained(x[r], precisions)
            except SingularCoordinateError:
                pass
        return logp, g


def make_block_target(block, Y, latent, hp):
    """
    Full-conditional target for one block of positions with everything else
    held at its current value. Row r of the block depends only on x[r].

    Leapfrog evaluations are not counted as incidents; run_chain counts them
    on the kept states only.
    """
    K = latent.K
    scale = hp.omega if block == 'beta' else hp.tau
    precisions = dist.svm_precisions(scale, K)

    def target(x):
        if block == 'beta':
            trial = model.LatentConfiguration(x, latent.psi, latent.zeta)
        elif block == 'psi':
            trial = model.LatentConfiguration(latent.beta, x, latent.zeta)
        else:
            trial = model.LatentConfiguration(latent.beta, latent.psi, x)
        with np.errstate(invalid='ignore', divide='ignore'):
            cells = model.loglik_cells(Y, trial, hp)
            g_beta, g_psi, g_zeta = grads.loglik_gradients(Y, trial, hp)
        prior_logp, prior_g = _rowwise_prior(x, precisions)
        if block == 'beta':
            return cells.sum(axis=1) + prior_logp, g_beta + prior_g
        like_g = g_psi if block == 'psi' else g_zeta
        return cells.sum(axis=0) + prior_logp, like_g + prior_g

    return target


# ---------------------------------------------------------------------------
# Scalar updates
# ---------------------------------------------------------------------------

def rwmh_lognormal_update(param, logposterior, state, rng, adapt=False):
    """
    Log-normal random walk: param' = param * exp(sd * N(0, 1)).

    Works element-wise on vectors whose components have independent full
    conditionals (`logposterior` then returns one value per component). The
    acceptance ratio includes the proposal correction param'/param.
    """
    param = np.atleast_1d(np.asarray(param, dtype=float))
    proposal = param * np.exp(state.sd * rng.standard_normal(param.shape))
    with np.errstate(invalid='ignore', over='ignore'):
        log_ratio = (np.asarray(logposterior(proposal)) - np.asarray(logposterior(param))
                     + np.log(proposal) - np.log(param))
    log_ratio = np.where(np.isfinite(log_ratio), log_ratio, -np.inf)
    accepted = np.log(rng.uniform(size=param.shape)) < log_ratio

    state.proposed += 1
    state.accepted = state.accepted + accepted
    if adapt:
        state.adapt(np.exp(np.minimum(log_ratio, 0.0)))
    new = np.where(accepted, proposal, param)
    return float(new[0]) if new.size == 1 else new


def gibbs_lambda(kappa, cfg, rng):
    """lambda | kappa ~ Gam(a_lambda + J c, b_lambda + sum kappa), rate parametrization"""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    if kappa.size and np.any(kappa <= 0):
        raise DomainError("kappa values must be positive")
    shape = cfg.a_lambda + kappa.size * cfg.c
    rate = cfg.b_lambda + float(np.sum(kappa))
    return float(rng.gamma(shape, 1.0 / rate))


def _kappa_logposterior(Y, e, lam, cfg):
    y1 = Y.observed & (Y.y == 1.0)
    y0 = Y.observed & (Y.y == 0.0)

    def logpost(kappa):
        k = kappa[None, :]
        with np.errstate(divide='ignore'):
            ll = (np.where(y1, np.log(np.maximum(dist.link_cdf(e, k), config.THETA_FLOOR)), 0.0)
                  + np.where(y0, np.log(np.maximum(dist.link_cdf(-e, k), config.THETA_FLOOR)), 0.0))
        return ll.sum(axis=0) + dist.gamma_log_density(kappa, cfg.c, lam)

    return logpost


def _scale_logposterior(points, shape, rate, K):
    cosine_total = np.sum(dist.svm_cosines(points), axis=0)
    n_points = points.shape[0]

    def logpost(scale):
        s = float(np.atleast_1d(scale)[0])
        if s <= 0:
            return -np.inf
        return (dist.svm_log_likelihood_scale(s, cosine_total, n_points, K)
                + dist.gamma_log_density(s, shape, rate))

    return logpost


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------

def _initial_state(Y, K, cfg, rng, initial_state, fixed):
    if initial_state is not None:
        latent = initial_state.latent.copy()
        hp = initial_state.hp.copy()
        if latent.K != K or latent.beta.shape[0] != Y.n_subjects or latent.psi.shape[0] != Y.n_items:
            raise InitializationError("Warm-start state does not match the data or K")
    else:
        latent = model.sample_prior_configuration(Y.n_subjects, Y.n_items, K,
                                                  config.INIT_OMEGA, config.INIT_TAU, rng)
        lam = cfg.a_lambda / cfg.b_lambda
        hp = model.Hyperparams(config.INIT_OMEGA, config.INIT_TAU,
                               np.full(Y.n_items, cfg.c / lam), lam)
    for name, value in (fixed or {}).items():
        if name not in HYPER_NAMES:
            raise DomainError(f"Cannot fix unknown hyperparameter '{name}'")
        if name == 'kappa':
            hp.kappa = np.broadcast_to(np.asarray(value, dtype=float), (Y.n_items,)).copy()
        else:
            setattr(hp, name, float(value))
    return latent, hp


def _redraw_schedule(ghmc, beta_range, item_range, rng):
    return {
        'beta_eps': rng.uniform(*beta_range),
        'item_eps': rng.uniform(*item_range),
        'beta_L': int(rng.integers(ghmc.leap_range[0], ghmc.leap_range[1] + 1)),
        'item_L': int(rng.integers(ghmc.leap_range[0], ghmc.leap_range[1] + 1)),
    }


def _switch_preset(current, presets, rate, label):
    """Move to the next smaller / larger preset range when acceptance leaves the target band"""
    if current not in presets:
        return current
    idx = presets.index(current)
    low, high = config.GHMC_TARGET_ACCEPTANCE
    if rate < low and idx > 0:
        idx -= 1
    elif rate > high and idx < len(presets) - 1:
        idx += 1
    if presets[idx] != current:
        logger.debug(f"{label} step-size range switched to {presets[idx]} (acceptance {rate:.2f})")
    return presets[idx]


def run_chain(Y, K, hyperpriors=None, ghmc=None, settings=None, seed=0,
              initial_state=None, fixed=None):
    """
    Run one hybrid GHMC / MH / Gibbs chain for the spherical model.

    Each sweep updates the beta block, the psi block and the zeta block by
    GHMC, then omega, tau and kappa by log-normal MH, then lambda by Gibbs.
    Hyperparameters named in `fixed` are held at the given values.
    """
    hyperpriors = hyperpriors or dist.HyperpriorConfig()
    ghmc = ghmc or GhmcConfig()
    settings = settings or SamplerSettings()
    if K < 1:
        raise DomainError("K must be at least 1")
    fixed = dict(fixed or {})

    rng = np.random.default_rng(seed)
    counter = NumericalIncidentCounter()
    latent, hp = _initial_state(Y, K, hyperpriors, rng, initial_state, fixed)

    start = model.log_posterior(Y, latent, hp, hyperpriors, counter)
    if not np.isfinite(start):
        raise InitializationError(f"Initial log posterior is not finite ({start})")

    I, J, d = Y.n_subjects, Y.n_items, K + 1
    n_keep = settings.kept
    draws = {
        'beta': np.empty((n_keep, I, d)), 'psi': np.empty((n_keep, J, d)),
        'zeta': np.empty((n_keep, J, d)), 'omega': np.empty(n_keep), 'tau': np.empty(n_keep),
        'kappa': np.empty((n_keep, J)), 'lam': np.empty(n_keep),
    }
    loglik = np.empty(n_keep)

    mh = {'omega': MhState.create(), 'tau': MhState.create(), 'kappa': MhState.create(J)}
    block_accept = {'beta': [], 'psi': [], 'zeta': []}
    window = {'beta': [], 'psi': [], 'zeta': []}
    beta_range, item_range = ghmc.beta_eps_range, ghmc.item_eps_range
    schedule = None

    total = settings.burn_in + settings.iterations
    kept = 0
    for it in tqdm(range(total), disable=not settings.progress, desc=f"K={K} chain"):
        burning = it < settings.burn_in
        if it == settings.burn_in:
            for state in mh.values():
                state.reset_counters()
        if it % ghmc.jitter_period == 0:
            if burning and it > 0 and ghmc.adapt_presets:
                beta_range = _switch_preset(beta_range, ghmc.beta_eps_presets,
                                            np.mean(window['beta']), 'beta')
                item_rate = np.mean(window['psi'] + window['zeta'])
                item_range = _switch_preset(item_range, ghmc.item_eps_presets, item_rate, 'item')
            window = {'beta': [], 'psi': [], 'zeta': []}
            schedule = _redraw_schedule(ghmc, beta_range, item_range, rng)
            logger.debug(f"Iteration {it}: jitter redraw {schedule}")

        for block in ('beta', 'psi', 'zeta'):
            eps = schedule['beta_eps'] if block == 'beta' else schedule['item_eps']
            L = schedule['beta_L'] if block == 'beta' else schedule['item_L']
            target = make_block_target(block, Y, latent, hp)
            new_x, accepted = ghmc_batch(getattr(latent, block), target, eps, L, rng, counter)
            setattr(latent, block, new_x)
            rate = float(np.mean(accepted))
            window[block].append(rate)
            if not burning:
                block_accept[block].append(rate)

        if 'omega' not in fixed:
            logpost = _scale_logposterior(latent.beta, hyperpriors.a_omega, hyperpriors.b_omega, K)
            hp.omega = rwmh_lognormal_update(hp.omega, logpost, mh['omega'], rng, adapt=burning)
        if 'tau' not in fixed:
            items = np.vstack([latent.psi, latent.zeta])
            logpost = _scale_logposterior(items, hyperpriors.a_tau, hyperpriors.b_tau, K)
            hp.tau = rwmh_lognormal_update(hp.tau, logpost, mh['tau'], rng, adapt=burning)
        if 'kappa' not in fixed:
            logpost = _kappa_logposterior(Y, model.e_matrix(latent), hp.lam, hyperpriors)
            hp.kappa = np.atleast_1d(
                rwmh_lognormal_update(hp.kappa, logpost, mh['kappa'], rng, adapt=burning))
        if 'lam' not in fixed:
            hp.lam = gibbs_lambda(hp.kappa, hyperpriors, rng)

        if not burning and (it - settings.burn_in) % settings.thin == 0:
            draws['beta'][kept] = latent.beta
            draws['psi'][kept] = latent.psi
            draws['zeta'][kept] = latent.zeta
            draws['omega'][kept] = hp.omega
            draws['tau'][kept] = hp.tau
            draws['kappa'][kept] = hp.kappa
            draws['lam'][kept] = hp.lam
            loglik[kept] = model.spherical_log_likelihood(Y, latent, hp, counter)
            kept += 1

    acceptance = {block: float(np.mean(rates)) if rates else 0.0
                  for block, rates in block_accept.items()}
    for name, state in mh.items():
        if name not in fixed:
            acceptance[name] = float(np.mean(state.acceptance_rate()))
    acceptance['beta_eps_range'] = list(beta_range)
    acceptance['item_eps_range'] = list(item_range)

    return ChainOutput(
        model='spherical', K=K, samples=draws, loglik=loglik, acceptance=acceptance,
        seed=int(seed),
        config={'hyperpriors': hyperpriors.to_dict(), 'ghmc': ghmc.to_dict(),
                'settings': settings.to_dict(),
                'fixed': {k: np.asarray(v).tolist() for k, v in fixed.items()}},
        incidents=counter.to_dict(), data_hash=Y.data_hash(),
        subject_ids=list(Y.subject_ids), item_ids=list(Y.item_ids),
    )


def _truncated_utilities(Y, eta, rng):
    """Albert-Chib latent utilities: z > 0 when y = 1, z <= 0 when y = 0, free when missing"""
    lower = np.where(Y.observed & (Y.y == 1.0), -eta, -np.inf)
    upper = np.where(Y.observed & (Y.y == 0.0), -eta, np.inf)
    return eta + stats.truncnorm.rvs(lower, upper, size=eta.shape, random_state=rng)


def _draw_gaussian_rows(precision, rhs, rng):
    """Draw each column of rhs's posterior N(P^-1 rhs, P^-1) for a shared precision P"""
    chol = np.linalg.cholesky(precision)
    mean = np.linalg.solve(precision, rhs)
    noise = np.linalg.solve(chol.T, rng.standard_normal(rhs.shape))
    return mean + noise


def run_euclidean_chain(Y, K, iterations=config.DEFAULT_ITERATIONS, burn_in=config.DEFAULT_BURN_IN,
                        seed=0, thin=1, progress=False, initial_state=None):
    """
    Gibbs sampler for the probit factor model with latent-utility augmentation.

    Priors: mu_j ~ N(0, 1/2), alpha_jk ~ N(0, 1/2), beta_ik ~ N(0, 6 / (pi k)^2).
    """
    if K < 1:
        raise DomainError("K must be at least 1")
    settings = SamplerSettings(iterations=iterations, burn_in=burn_in, thin=thin, progress=progress)
    rng = np.random.default_rng(seed)
    I, J = Y.n_subjects, Y.n_items
    var_mu, var_alpha, var_beta = model.euclidean_prior_variances(K)

    params = initial_state if initial_state is not None else model.sample_euclidean_prior(I, J, K, rng)
    mu, alpha, beta = params.mu.copy(), params.alpha.copy(), params.beta.copy()
    if beta.shape != (I, K) or alpha.shape != (J, K):
        raise InitializationError("Warm-start parameters do not match the data or K")

    item_prior = np.diag(np.concatenate([[1.0 / var_mu], np.full(K, 1.0 / var_alpha)]))
    subject_prior = np.diag(1.0 / var_beta)

    n_keep = settings.kept
    draws = {'mu': np.empty((n_keep, J)), 'alpha': np.empty((n_keep, J, K)),
             'beta': np.empty((n_keep, I, K))}
    loglik = np.empty(n_keep)
    kept = 0

    for it in tqdm(range(burn_in + iterations), disable=not progress, desc=f"K={K} euclidean"):
        eta = mu[None, :] + beta @ alpha.T
        z = _truncated_utilities(Y, eta, rng)

        X = np.hstack([np.ones((I, 1)), beta])
        coef = _draw_gaussian_rows(X.T @ X + item_prior, X.T @ z, rng)
        mu, alpha = coef[0], coef[1:].T

        beta = _draw_gaussian_rows(alpha.T @ alpha + subject_prior,
                                   alpha.T @ (z - mu[None, :]).T, rng).T

        if it >= burn_in and (it - burn_in) % thin == 0:
            draws['mu'][kept] = mu
            draws['alpha'][kept] = alpha
            draws['beta'][kept] = beta
            loglik[kept] = model.euclidean_probit_log_likelihood(
                Y, model.EuclideanParams(mu, alpha, beta))
            kept += 1

    return ChainOutput(
        model='euclidean', K=K, samples=draws, loglik=loglik, acceptance={'gibbs': 1.0},
        seed=int(seed), config={'settings': settings.to_dict()},
        incidents=NumericalIncidentCounter().to_dict(), data_hash=Y.data_hash(),
        subject_ids=list(Y.subject_ids), item_ids=list(Y.item_ids),
    )


def chain_seeds(seed, chains):
    """Independent integer seeds for `chains` chains derived from one master seed"""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(chains)]


def run_chains(Y, K, chains=1, seed=0, model_name='spherical', n_jobs=None, **kwargs):
    """
    Run independent chains in parallel (joblib), one derived seed each.

    Results are in seed order and do not depend on n_jobs.
    """
    if chains < 1:
        raise DomainError("At least one chain is required")
    if model_name not in ('spherical', 'euclidean'):
        raise DomainError(f"Unknown model '{model_name}'")
    n_jobs = n_jobs or config.THREADS
    seeds = chain_seeds(seed, chains)
    runner = run_chain if model_name == 'spherical' else run_euclidean_chain
    logger.info(f"Running {chains} {model_name} chain(s) with K={K} on {n_jobs} worker(s)")
    return Parallel(n_jobs=n_jobs)(delayed(runner)(Y, K, seed=s, **kwargs) for s in seeds)
