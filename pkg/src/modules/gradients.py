"""
Gradients Module
================

Analytic gradients of the log full conditionals of the latent positions,
written in Cartesian coordinates, plus a finite-difference oracle.

Two forms are produced. The unconstrained form differentiates the density
formula as a function on R^{K+1}. The constrained form treats x_1..x_K as
free and x_{K+1} = sign * sqrt(1 - x_1^2 - ... - x_K^2) as dependent, so its
last entry is 0. Both have the same tangent projection, which is all GHMC
uses.
"""

import logging
from functools import lru_cache

import numpy as np

import config
from modules import distributions as dist
from modules.errors import DomainError, SingularCoordinateError, StepSizeError
from modules.geometry import tangent_project
from modules.model import e_matrix

logger = logging.getLogger(__name__)

TARGETS = ('beta', 'psi', 'zeta')


@lru_cache(maxsize=None)
def triangular_masks(K):
    """
    0/1 masks that vectorize the prior gradient over coordinates.

    jacobian_mask[t-1, m-2] = 1 when coordinate t enters S_m with m >= max(t, 2)
    (the sum of 1/S_m terms in the Jacobian derivative).
    precision_mask[t-1, k-2] = 1 when t <= k, for the cos(2 phi_k) terms with k >= 2.
    """
    t = np.arange(1, K + 2)[:, None]
    m = np.arange(2, K + 2)[None, :]
    jacobian_mask = (m >= np.maximum(t, 2)).astype(float)
    k = np.arange(2, K + 1)[None, :]
    precision_mask = (t <= k).astype(float)
    jacobian_mask.setflags(write=False)
    precision_mask.setflags(write=False)
    return jacobian_mask, precision_mask


def arccos_ratio(d):
    """
    arccos(d) / sqrt(1 - d^2), the factor shared by every distance derivative.

    Near d = 1 the removable singularity is replaced by its limit 1; near
    d = -1 the argument is held at -1 + ARCCOS_GUARD.
    """
    d = np.clip(np.asarray(d, dtype=float), -1.0, 1.0)
    near = (1.0 - d * d) < config.ARCCOS_GUARD
    d_safe = np.where(near & (d < 0), -1.0 + config.ARCCOS_GUARD, d)
    d_safe = np.where(near & (d >= 0), 0.0, d_safe)
    ratio = np.arccos(d_safe) / np.sqrt(1.0 - d_safe * d_safe)
    return np.where(near & (d >= 0), 1.0, ratio)


def constrain(x, g):
    """
    Convert an unconstrained gradient to the constrained form g - (g_{K+1}/x_{K+1}) x.

    Rows with |x_{K+1}| below LAST_COORD_GUARD fall back to the tangent projection of g.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    last = x[..., -1:]
    small = np.abs(last) < config.LAST_COORD_GUARD
    safe_last = np.where(small, 1.0, last)
    constrained = g - (g[..., -1:] / safe_last) * x
    return np.where(small, tangent_project(x, g), constrained)


# ---------------------------------------------------------------------------
# Prior + Jacobian
# ---------------------------------------------------------------------------

def grad_prior_jacobian_unconstrained(x, precisions):
    """Gradient on R^{K+1} of the SvM Hausdorff log-density formula; rows are points"""
    omega = np.atleast_1d(np.asarray(precisions, dtype=float))
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    K = x.shape[1] - 1
    if omega.size != K:
        raise DomainError(f"Expected {K} precisions, got {omega.size}")

    S = np.cumsum(x ** 2, axis=1)
    if np.any(S[:, 1:] < config.SINGULAR_PREFIX_TOL):
        raise SingularCoordinateError("A prefix sum of squares vanishes; prior gradient undefined")
    jacobian_mask, precision_mask = triangular_masks(K)

    g = -x * ((1.0 / S[:, 1:]) @ jacobian_mask.T)

    s2_32 = S[:, 1] ** 1.5
    g[:, 0] += omega[0] * x[:, 1] ** 2 / s2_32
    g[:, 1] -= omega[0] * x[:, 0] * x[:, 1] / s2_32

    if K > 1:
        S_next = S[:, 2:] ** 2
        a = omega[1:] * x[:, 2:] ** 2 / S_next
        g += 4.0 * x * (a @ precision_mask.T)
        g[:, 2:] -= 4.0 * omega[1:] * x[:, 2:] * S[:, 1:-1] / S_next
    return g[0] if single else g


def grad_prior_jacobian(x, precisions, constrained=True):
    """Gradient of log SvM Hausdorff density (prior plus Jacobian); last entry 0 when constrained"""
    g = grad_prior_jacobian_unconstrained(x, precisions)
    return constrain(x, g) if constrained else g


# ---------------------------------------------------------------------------
# Likelihood
# ---------------------------------------------------------------------------

def link_weights(Y, latent, hp, counter=None):
    """
    dl/de for every cell: g(e) (y / theta - (1 - y) / (1 - theta)), zero where missing.
    """
    e = e_matrix(latent)
    kappa = hp.kappa[None, :]
    pdf = dist.link_pdf(e, kappa, counter=counter)
    p1 = np.maximum(dist.link_cdf(e, kappa), config.THETA_FLOOR)
    p0 = np.maximum(dist.link_cdf(-e, kappa), config.THETA_FLOOR)
    w = np.where(Y.y == 1.0, pdf / p1, -pdf / p0)
    return np.where(Y.observed, w, 0.0)


def loglik_gradients(Y, latent, hp, counter=None):
    """
    Unconstrained likelihood gradients for all positions at once.

    Returns (grad_beta (I, K+1), grad_psi (J, K+1), grad_zeta (J, K+1)).
    """
    w = link_weights(Y, latent, hp, counter)
    r_zeta = arccos_ratio(latent.beta @ latent.zeta.T)
    r_psi = arccos_ratio(latent.beta @ latent.psi.T)
    wz = w * r_zeta
    wp = w * r_psi
    g_beta = -2.0 * wz @ latent.zeta + 2.0 * wp @ latent.psi
    g_zeta = -2.0 * wz.T @ latent.beta
    g_psi = 2.0 * wp.T @ latent.beta
    return g_beta, g_psi, g_zeta


def grad_loglik_beta(i, Y, latent, hp, constrained=True):
    w = link_weights(Y, latent, hp)[i]
    b = latent.beta[i]
    g = (-2.0 * (w * arccos_ratio(latent.zeta @ b)) @ latent.zeta
         + 2.0 * (w * arccos_ratio(latent.psi @ b)) @ latent.psi)
    return constrain(b, g) if constrained else g


def grad_loglik_zeta(j, Y, latent, hp, constrained=True):
    w = link_weights(Y, latent, hp)[:, j]
    z = latent.zeta[j]
    g = -2.0 * (w * arccos_ratio(latent.beta @ z)) @ latent.beta
    return constrain(z, g) if constrained else g


def grad_loglik_psi(j, Y, latent, hp, constrained=True):
    w = link_weights(Y, latent, hp)[:, j]
    p = latent.psi[j]
    g = 2.0 * (w * arccos_ratio(latent.beta @ p)) @ latent.beta
    return constrain(p, g) if constrained else g


_LOGLIK_GRADIENTS = {
    'beta': grad_loglik_beta,
    'psi': grad_loglik_psi,
    'zeta': grad_loglik_zeta,
}


def grad_full_conditional(target, index, Y, latent, hp, constrained=True):
    """Likelihood gradient plus prior-and-Jacobian gradient for one latent position"""
    if target not in TARGETS:
        raise DomainError(f"Unknown target '{target}'; expected one of {TARGETS}")
    x = getattr(latent, target)[index]
    scale = hp.omega if target == 'beta' else hp.tau
    g = (_LOGLIK_GRADIENTS[target](index, Y, latent, hp, constrained=False)
         + grad_prior_jacobian_unconstrained(x, dist.svm_precisions(scale, latent.K)))
    return constrain(x, g) if constrained else g


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def _complete(free, sign):
    rest = 1.0 - np.sum(free ** 2)
    if rest < 0:
        raise StepSizeError("Finite-difference step leaves the unit sphere")
    return np.append(free, sign * np.sqrt(rest))


def finite_difference_gradient(logdensity, x, h=config.FD_STEP):
    """
    Central differences over x_1..x_K with x_{K+1} recomputed to keep unit
    norm (its sign preserved). The returned vector has last entry 0.
    """
    x = np.asarray(x, dtype=float)
    if not h > 0 or np.any((x[:-1] + h) == x[:-1]):
        raise StepSizeError(f"Step h={h} is below the resolution of the coordinates")
    sign = 1.0 if x[-1] >= 0 else -1.0
    free = x[:-1]
    grad = np.zeros_like(x)
    for t in range(free.size):
        up = free.copy()
        down = free.copy()
        up[t] += h
        down[t] -= h
        grad[t] = (logdensity(_complete(up, sign)) - logdensity(_complete(down, sign))) / (2.0 * h)
    return grad
