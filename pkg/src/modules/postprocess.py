"""
Postprocess Module
==================

Identifiability resolution and posterior summaries for spherical chains.

The likelihood only sees geodesic distances, so every orthogonal transform of
a configuration fits equally well. Samples are made comparable by flipping
coordinate signs (octant fixing) and by orthogonal Procrustes alignment to a
reference configuration.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats
from scipy.linalg import orthogonal_procrustes

import config
from modules import distributions as dist
from modules import model
from modules.errors import DomainError
from modules.geometry import cartesian_to_spherical

logger = logging.getLogger(__name__)

POSITION_BLOCKS = ('beta', 'psi', 'zeta')


@dataclass
class AlignedSamples:
    """Aligned position draws (n, rows, K+1) with the hyperparameter draws carried along"""
    beta: np.ndarray
    psi: np.ndarray
    zeta: np.ndarray
    kappa: np.ndarray
    loglik: np.ndarray
    reference_sample: int = None
    reference_subject: int = None
    steps: list = field(default_factory=list)
    subject_ids: list = field(default_factory=list)
    item_ids: list = field(default_factory=list)

    @classmethod
    def from_chain(cls, chain):
        if chain.model != 'spherical':
            raise DomainError("Alignment applies to spherical chains only")
        return cls(
            beta=chain.samples['beta'].copy(), psi=chain.samples['psi'].copy(),
            zeta=chain.samples['zeta'].copy(), kappa=chain.samples['kappa'].copy(),
            loglik=np.asarray(chain.loglik, dtype=float).copy(),
            subject_ids=list(chain.subject_ids), item_ids=list(chain.item_ids),
        )

    @property
    def n_samples(self):
        return self.beta.shape[0]

    @property
    def K(self):
        return self.beta.shape[2] - 1

    def latent(self, s):
        return model.LatentConfiguration(self.beta[s], self.psi[s], self.zeta[s])

    def stacked(self, s):
        """All positions of sample s as one (I + 2J, K+1) array"""
        return np.vstack([self.beta[s], self.psi[s], self.zeta[s]])

    def _transform(self, s, matrix):
        for block in POSITION_BLOCKS:
            arr = getattr(self, block)
            arr[s] = arr[s] @ matrix


def _as_aligned(samples):
    if isinstance(samples, AlignedSamples):
        return AlignedSamples(
            samples.beta.copy(), samples.psi.copy(), samples.zeta.copy(), samples.kappa.copy(),
            samples.loglik.copy(), samples.reference_sample, samples.reference_subject,
            list(samples.steps), list(samples.subject_ids), list(samples.item_ids),
        )
    return AlignedSamples.from_chain(samples)


def fix_reflections(samples, reference_subject=0):
    """
    Flip coordinate signs, consistently for every position of a sample, so
    that the reference subject has nonnegative Cartesian coordinates. Zero
    coordinates count as positive.
    """
    aligned = _as_aligned(samples)
    if aligned.n_samples == 0:
        raise DomainError("fix_reflections needs at least one sample")
    if not 0 <= reference_subject < aligned.beta.shape[1]:
        raise DomainError(f"Reference subject {reference_subject} out of range")

    ref = aligned.beta[:, reference_subject, :]
    ties = int(np.count_nonzero(ref == 0.0))
    if ties:
        logger.warning(f"{ties} zero reference coordinates; ties broken toward +")
    signs = np.where(ref < 0.0, -1.0, 1.0)
    for block in POSITION_BLOCKS:
        arr = getattr(aligned, block)
        arr *= signs[:, None, :]
    aligned.reference_subject = reference_subject
    aligned.steps.append('reflections')
    return aligned


def procrustes_objective(positions, reference):
    """Sum of squared chordal distances between matched positions"""
    return float(np.sum((positions - reference) ** 2))


def procrustes_align(samples, reference=None, reference_subject=0):
    """
    Rotate/reflect each sample onto the reference configuration with the
    orthogonal matrix minimizing the summed squared chordal distance.

    The default reference is the sample with the highest log-likelihood.
    Samples with a rank-deficient cross-covariance fall back to reflection
    fixing.
    """
    aligned = _as_aligned(samples)
    if aligned.n_samples == 0:
        raise DomainError("procrustes_align needs at least one sample")

    if reference is None:
        aligned.reference_sample = int(np.argmax(aligned.loglik))
        target = aligned.stacked(aligned.reference_sample).copy()
    else:
        target = np.vstack([reference.beta, reference.psi, reference.zeta])
        if target.shape != aligned.stacked(0).shape:
            raise DomainError("Reference configuration shape does not match the samples")

    d = target.shape[1]
    fallbacks = []
    for s in range(aligned.n_samples):
        current = aligned.stacked(s)
        if np.linalg.matrix_rank(current.T @ target) < d:
            fallbacks.append(s)
            continue
        R, _ = orthogonal_procrustes(current, target)
        aligned._transform(s, R)

    if fallbacks:
        logger.warning(f"Procrustes fell back to reflection fixing for {len(fallbacks)} sample(s)")
        ref = aligned.beta[fallbacks, reference_subject, :]
        signs = np.where(ref < 0.0, -1.0, 1.0)
        for block in POSITION_BLOCKS:
            arr = getattr(aligned, block)
            arr[fallbacks] *= signs[:, None, :]
    aligned.steps.append('procrustes')
    return aligned


def align(chain, reference_subject=0, method='reflections+procrustes'):
    """Default pipeline: octant fixing, then Procrustes to the best-fitting sample"""
    steps = method.split('+')
    unknown = set(steps) - {'reflections', 'procrustes'}
    if unknown:
        raise DomainError(f"Unknown alignment step(s): {sorted(unknown)}")
    aligned = _as_aligned(chain)
    for step in steps:
        if step == 'reflections':
            aligned = fix_reflections(aligned, reference_subject)
        else:
            aligned = procrustes_align(aligned, reference_subject=reference_subject)
    return aligned


def _wrap(angle):
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


def _angle_intervals(angles, level):
    """Equal-tailed intervals per column, first angle unwrapped around its circular mean"""
    tail = 100.0 * (1.0 - level) / 2.0
    center = np.zeros(angles.shape[1:])
    center[..., 0] = stats.circmean(angles[..., 0], high=np.pi, low=-np.pi, axis=0)
    shifted = angles - center
    shifted[..., 0] = _wrap(shifted[..., 0])
    mean = shifted.mean(axis=0) + center
    lower = np.percentile(shifted, tail, axis=0) + center
    upper = np.percentile(shifted, 100.0 - tail, axis=0) + center
    mean[..., 0] = _wrap(mean[..., 0])
    return mean, lower, upper


def posterior_mean_positions(aligned):
    """Mean of each position's draws, projected back to the sphere"""
    out = {}
    for block in POSITION_BLOCKS:
        m = getattr(aligned, block).mean(axis=0)
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        out[block] = m / np.where(norms > 0, norms, 1.0)
    return model.LatentConfiguration(out['beta'], out['psi'], out['zeta'])


def posterior_mean_theta(aligned):
    total = np.zeros((aligned.beta.shape[1], aligned.psi.shape[1]))
    for s in range(aligned.n_samples):
        hp = model.Hyperparams(1.0, 1.0, aligned.kappa[s], 1.0)
        total += model.theta_matrix(aligned.latent(s), hp)
    return total / max(aligned.n_samples, 1)


def summarize(aligned, level=config.CREDIBLE_LEVEL):
    """
    Posterior summaries of aligned samples.

    Returns a dict with 'positions' (long DataFrame, one row per position and
    dimension), 'mean_positions' (LatentConfiguration) and 'theta_mean' (I x J).
    """
    if aligned.n_samples == 0:
        raise DomainError("Nothing to summarize")
    means = posterior_mean_positions(aligned)
    rows = []
    for block in POSITION_BLOCKS:
        draws = getattr(aligned, block)
        angles = cartesian_to_spherical(draws, strict=False)
        angle_mean, lower, upper = _angle_intervals(angles, level)
        ids = aligned.subject_ids if block == 'beta' else aligned.item_ids
        mean_pos = getattr(means, block)
        for r in range(draws.shape[1]):
            for k in range(angles.shape[2]):
                rows.append({
                    'role': block,
                    'id': ids[r] if r < len(ids) else str(r),
                    'dimension': k + 1,
                    'cartesian_mean': mean_pos[r, k],
                    'angle_mean': angle_mean[r, k],
                    'angle_lower': lower[r, k],
                    'angle_upper': upper[r, k],
                })
    return {
        'positions': pd.DataFrame(rows),
        'mean_positions': means,
        'theta_mean': posterior_mean_theta(aligned),
    }


def circular_ranks(aligned):
    """
    Rank subjects by their angle on the circle (K = 1) in every sample and
    report the median rank per subject. Ties get average ranks.
    """
    if aligned.K != 1:
        raise DomainError("circular_ranks needs a K = 1 model")
    angles = np.arctan2(aligned.beta[:, :, 1], aligned.beta[:, :, 0])
    ranks = stats.rankdata(angles, axis=1)
    return pd.DataFrame({
        'subject_id': aligned.subject_ids or [str(i) for i in range(angles.shape[1])],
        'median_rank': np.median(ranks, axis=0),
    })


def euclidean_ranks(chain):
    """Median rank of the 1-D Euclidean ideal points, each sample oriented like the first"""
    if chain.model != 'euclidean' or chain.K != 1:
        raise DomainError("euclidean_ranks needs a K = 1 Euclidean chain")
    points = chain.samples['beta'][:, :, 0]
    signs = np.where(points @ points[0] < 0.0, -1.0, 1.0)
    ranks = stats.rankdata(points * signs[:, None], axis=1)
    return pd.DataFrame({
        'subject_id': list(chain.subject_ids) or [str(i) for i in range(points.shape[1])],
        'median_rank': np.median(ranks, axis=0),
    })


def _inverse_gamma_density(v, shape, rate):
    v = np.asarray(v, dtype=float)
    return np.exp(dist.gamma_log_density(1.0 / v, shape, rate)) / v ** 2


def summarize_hyperparameters(chain, cfg, grid_size=200):
    """
    Posterior table for omega, tau, 1/lambda and the sphericity measure 1/omega,
    plus a long table of the prior density on a grid spanning the draws.
    """
    draws = {
        'omega': chain.samples['omega'],
        'tau': chain.samples['tau'],
        'inv_lambda': 1.0 / chain.samples['lam'],
        'inv_omega': 1.0 / chain.samples['omega'],
    }
    priors = {
        'omega': lambda x: np.exp(dist.gamma_log_density(x, cfg.a_omega, cfg.b_omega)),
        'tau': lambda x: np.exp(dist.gamma_log_density(x, cfg.a_tau, cfg.b_tau)),
        'inv_lambda': lambda x: _inverse_gamma_density(x, cfg.a_lambda, cfg.b_lambda),
        'inv_omega': lambda x: _inverse_gamma_density(x, cfg.a_omega, cfg.b_omega),
    }
    summary, curves = [], []
    for name, values in draws.items():
        q = np.percentile(values, [2.5, 50.0, 97.5])
        summary.append({'parameter': name, 'mean': values.mean(), 'sd': values.std(ddof=1),
                        'q2.5': q[0], 'q50': q[1], 'q97.5': q[2]})
        grid = np.linspace(values.min(), values.max(), grid_size)
        grid = grid[grid > 0]
        curves.append(pd.DataFrame({'parameter': name, 'x': grid, 'prior_density': priors[name](grid)}))
    return pd.DataFrame(summary), pd.concat(curves, ignore_index=True)


def interval_coverage(chain, truth, level=config.CREDIBLE_LEVEL):
    """
    Fraction of true subject angles inside the equal-tailed credible intervals,
    after aligning every sample to the true configuration.

    Returns coverage, its binomial standard error and a normal 95% interval.
    """
    aligned = procrustes_align(chain, reference=truth)
    angles = cartesian_to_spherical(aligned.beta, strict=False)
    _, lower, upper = _angle_intervals(angles, level)
    true_angles = cartesian_to_spherical(truth.beta, strict=False)
    center = stats.circmean(angles[..., 0], high=np.pi, low=-np.pi, axis=0)
    rel = true_angles.copy()
    rel[:, 0] = _wrap(rel[:, 0] - center) + center
    covered = (rel >= lower) & (rel <= upper)
    p = float(np.mean(covered))
    n = covered.size
    se = float(np.sqrt(p * (1.0 - p) / n))
    return {'coverage': p, 'se': se, 'ci_low': p - 1.96 * se, 'ci_high': p + 1.96 * se, 'n': n}
