"""
Distributions Module
====================

Densities, samplers and special functions used by the spherical factor model:
the scaled symmetric-beta link, the spherical von Mises (SvM) distribution in
angular and Cartesian (Hausdorff) form, the von Mises-Fisher distribution and
the Gamma hyperpriors.

All Gamma densities use the shape / RATE convention.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

import config
from modules.errors import DimensionMismatchError, DomainError, SingularCoordinateError

logger = logging.getLogger(__name__)

PI2 = np.pi ** 2
LINK_HALF_WIDTH = PI2


@dataclass
class HyperpriorConfig:
    """Gamma hyperprior settings: shape/rate pairs for omega, tau, lambda and the kappa shape c"""
    a_omega: float = config.DEFAULT_HYPERPRIORS['a_omega']
    b_omega: float = config.DEFAULT_HYPERPRIORS['b_omega']
    a_tau: float = config.DEFAULT_HYPERPRIORS['a_tau']
    b_tau: float = config.DEFAULT_HYPERPRIORS['b_tau']
    a_lambda: float = config.DEFAULT_HYPERPRIORS['a_lambda']
    b_lambda: float = config.DEFAULT_HYPERPRIORS['b_lambda']
    c: float = config.DEFAULT_HYPERPRIORS['c']

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"Hyperprior '{name}' must be positive and finite, got {value}")

    @classmethod
    def from_preset(cls, name):
        if name not in config.HYPERPRIOR_PRESETS:
            raise DomainError(
                f"Unknown hyperprior preset '{name}'. Available: {sorted(config.HYPERPRIOR_PRESETS)}"
            )
        return cls(**config.HYPERPRIOR_PRESETS[name])

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def log_bessel_i0(x):
    """log I_0(x) via the exponentially scaled Bessel function, safe for large x"""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("log_bessel_i0 requires x >= 0")
    result = np.log(special.i0e(x)) + x
    return float(result) if result.ndim == 0 else result


def log_bessel_iv(order, x):
    """log I_v(x) for v >= 0, x > 0"""
    x = np.asarray(x, dtype=float)
    return np.log(special.ive(order, x)) + x


def gamma_log_density(x, shape, rate):
    """Gamma(shape, rate) log-density; -inf for nonpositive x"""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        logp = (shape * np.log(rate) - special.gammaln(shape)
                + special.xlogy(shape - 1.0, x) - rate * x)
    logp = np.where(x > 0, logp, -np.inf)
    return float(logp) if logp.ndim == 0 else logp


# ---------------------------------------------------------------------------
# Link function
# ---------------------------------------------------------------------------

def _link_argument(z, strict, counter):
    z = np.asarray(z, dtype=float)
    outside = np.abs(z) > LINK_HALF_WIDTH
    if np.any(outside):
        if strict:
            raise DomainError("Link argument outside [-pi^2, pi^2]")
        overshoot = float(np.max(np.abs(z)) - LINK_HALF_WIDTH)
        if counter is not None:
            counter.link_clamped += int(np.count_nonzero(outside))
        if overshoot > 1e-9:
            logger.warning(f"Link argument clamped into [-pi^2, pi^2] (overshoot {overshoot:.3e})")
        z = np.clip(z, -LINK_HALF_WIDTH, LINK_HALF_WIDTH)
    return (z + PI2) / (2.0 * PI2)


def link_cdf(z, kappa, strict=config.LINK_STRICT, counter=None):
    """
    G_kappa(z): CDF of a Beta(kappa, kappa) variable shifted and scaled onto
    [-pi^2, pi^2], evaluated as the regularized incomplete beta I_u(kappa, kappa)
    with u = (z + pi^2) / (2 pi^2).
    """
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa <= 0):
        raise DomainError("Link concentration kappa must be positive")
    u = _link_argument(z, strict, counter)
    return special.betainc(kappa, kappa, u)


def link_log_pdf(z, kappa, strict=config.LINK_STRICT, counter=None):
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa <= 0):
        raise DomainError("Link concentration kappa must be positive")
    u = _link_argument(z, strict, counter)
    with np.errstate(divide='ignore'):
        return (special.xlogy(kappa - 1.0, u) + special.xlog1py(kappa - 1.0, -u)
                - special.betaln(kappa, kappa) - np.log(2.0 * PI2))


def link_pdf(z, kappa, strict=config.LINK_STRICT, counter=None):
    """Derivative of link_cdf with respect to z"""
    return np.exp(link_log_pdf(z, kappa, strict=strict, counter=counter))


def link_gaussian_log_pdf(z, kappa):
    """Normal approximation to the link density: N(0, pi^4 / (2 kappa + 1))"""
    var = np.pi ** 4 / (2.0 * np.asarray(kappa, dtype=float) + 1.0)
    return -0.5 * np.log(2.0 * np.pi * var) - 0.5 * np.asarray(z) ** 2 / var


def link_gaussian_ratio(s, kappa):
    """
    Ratio of the link density to its normal approximation at the standardized
    point s, i.e. at z = s * pi^2 / sqrt(2 kappa + 1).
    """
    z = np.asarray(s, dtype=float) * PI2 / np.sqrt(2.0 * kappa + 1.0)
    return np.exp(link_log_pdf(z, kappa) - link_gaussian_log_pdf(z, kappa))


# ---------------------------------------------------------------------------
# Spherical von Mises
# ---------------------------------------------------------------------------

def svm_precisions(scale, K):
    """Polynomially increasing precision vector (scale, 4 scale, ..., K^2 scale)"""
    return float(scale) * np.arange(1, K + 1, dtype=float) ** 2


def _check_svm_params(omega):
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.ndim != 1 or omega.size < 1:
        raise DimensionMismatchError("SvM precisions must be a non-empty vector")
    if np.any(~np.isfinite(omega)) or np.any(omega <= 0):
        raise DomainError("SvM precisions must be positive and finite")
    return omega


def _svm_log_normalizer(omega):
    lead = -np.log(2.0 * np.pi) - log_bessel_i0(omega[0])
    rest = -np.log(np.pi) * (omega.size - 1) - np.sum(log_bessel_i0(omega[1:])) if omega.size > 1 else 0.0
    return lead + rest


def svm_log_density_angles(phi, omega):
    """Log density of SvM(omega) with respect to Lebesgue measure on the angles"""
    omega = _check_svm_params(omega)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 0:
        phi = phi[None]
    if phi.shape[-1] != omega.size:
        raise DimensionMismatchError(
            f"Angle vector has {phi.shape[-1]} entries, precisions have {omega.size}"
        )
    value = omega[0] * np.cos(phi[..., 0])
    if omega.size > 1:
        value = value + np.sum(omega[1:] * np.cos(2.0 * phi[..., 1:]), axis=-1)
    return value + _svm_log_normalizer(omega)


def prefix_sums(x):
    """S_m = x_1^2 + ... + x_m^2 for m = 1..K+1"""
    return np.cumsum(np.asarray(x, dtype=float) ** 2, axis=-1)


def svm_log_density_hausdorff(x, omega):
    """
    Log density of SvM(omega) with respect to the surface measure of S^K,
    written in Cartesian coordinates.

    The Jacobian factor is 1 / prod_{k=1..K} sqrt(S_{k+1}); cos(phi_1) is
    x_1 / sqrt(S_2) and cos(2 phi_k) is 1 - 2 x_{k+1}^2 / S_{k+1}.
    """
    omega = _check_svm_params(omega)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != omega.size + 1:
        raise DimensionMismatchError(
            f"Point has {x.shape[-1]} coordinates, expected {omega.size + 1}"
        )
    S = prefix_sums(x)[..., 1:]
    if np.any(S < config.SINGULAR_PREFIX_TOL):
        raise SingularCoordinateError("A prefix sum of squares vanishes at this point")

    log_jac = -0.5 * np.sum(np.log(S), axis=-1)
    value = omega[0] * x[..., 0] / np.sqrt(S[..., 0])
    if omega.size > 1:
        cos2 = 1.0 - 2.0 * x[..., 2:] ** 2 / S[..., 1:]
        value = value + np.sum(omega[1:] * cos2, axis=-1)
    return value + log_jac + _svm_log_normalizer(omega)


def svm_cosines(x):
    """
    Per-point (cos phi_1, cos 2 phi_2, ..., cos 2 phi_K) computed from Cartesian
    coordinates; the sufficient statistics of the SvM precisions.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    S = prefix_sums(x)[:, 1:]
    safe = np.maximum(S, config.SINGULAR_PREFIX_TOL)
    out = np.empty((x.shape[0], x.shape[1] - 1))
    out[:, 0] = x[:, 0] / np.sqrt(safe[:, 0])
    out[:, 1:] = 1.0 - 2.0 * x[:, 2:] ** 2 / safe[:, 1:]
    return out


def svm_log_likelihood_scale(scale, cosine_total, n_points, K):
    """
    log of prod_i SvM(x_i | scale * (1, 4, ..., K^2)) as a function of the
    scale, dropping terms that do not depend on it. `cosine_total` is the
    column sum of svm_cosines over the n_points positions.
    """
    prec = svm_precisions(scale, K)
    return float(prec @ cosine_total - n_points * np.sum(log_bessel_i0(prec)))


def svm_gaussian_log_density(phi, omega):
    """Zero-mean normal approximation with variances (1/omega_1, 1/(4 omega_2), ...)"""
    omega = _check_svm_params(omega)
    phi = np.asarray(phi, dtype=float)
    prec = omega.copy()
    prec[1:] *= 4.0
    return (-0.5 * omega.size * np.log(2.0 * np.pi) + 0.5 * np.sum(np.log(prec))
            - 0.5 * np.sum(prec * phi ** 2, axis=-1))


def svm_sample(omega, rng, size=None):
    """
    Draw SvM(omega) angles.

    phi_1 ~ von Mises(0, omega_1) on [-pi, pi]; for k >= 2, 2 phi_k ~ von Mises(0, omega_k)
    so phi_k has density proportional to exp(omega_k cos 2 phi_k) on [-pi/2, pi/2].
    """
    omega = _check_svm_params(omega)
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    phi = np.empty(shape + (omega.size,))
    phi[..., 0] = rng.vonmises(0.0, omega[0], size=shape)
    for k in range(1, omega.size):
        phi[..., k] = 0.5 * rng.vonmises(0.0, omega[k], size=shape)
    return phi


def svm_sample_batch(omegas, rng):
    """One SvM draw per row of an (n, K) array of precision vectors"""
    omegas = np.asarray(omegas, dtype=float)
    if np.any(omegas <= 0):
        raise DomainError("SvM precisions must be positive")
    phi = rng.vonmises(0.0, omegas)
    phi[:, 1:] *= 0.5
    return phi


# ---------------------------------------------------------------------------
# von Mises-Fisher
# ---------------------------------------------------------------------------

def sphere_log_area(d):
    """log surface area of the unit sphere in R^d"""
    return np.log(2.0) + 0.5 * d * np.log(np.pi) - special.gammaln(0.5 * d)


def vmf_log_density(x, eta, omega):
    """Log Hausdorff density of vMF(eta, omega) on the unit sphere of R^d"""
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if x.shape[-1] != eta.shape[-1]:
        raise DimensionMismatchError("vMF point and mean direction differ in dimension")
    if omega < 0:
        raise DomainError("vMF precision must be nonnegative")
    d = eta.shape[-1]
    if omega == 0:
        return np.full(x.shape[:-1], -sphere_log_area(d)) if x.ndim > 1 else -sphere_log_area(d)
    nu = 0.5 * d - 1.0
    log_const = nu * np.log(omega) - 0.5 * d * np.log(2.0 * np.pi) - log_bessel_iv(nu, omega)
    return log_const + omega * (x @ eta)


def vmf_mean_resultant(omega, d):
    """E[eta'x] = I_{d/2}(omega) / I_{d/2-1}(omega)"""
    if omega == 0:
        return 0.0
    return float(special.ive(0.5 * d, omega) / special.ive(0.5 * d - 1.0, omega))


def _wood_rejection(omega, d, n, rng):
    """Sample w = eta'x by Wood's rejection scheme, vectorized over pending draws"""
    m = d - 1
    b = m / (np.sqrt(4.0 * omega ** 2 + m ** 2) + 2.0 * omega)
    x0 = (1.0 - b) / (1.0 + b)
    c = omega * x0 + m * np.log(1.0 - x0 ** 2)

    w = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        z = rng.beta(0.5 * m, 0.5 * m, size=pending.size)
        cand = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=pending.size)
        ok = omega * cand + m * np.log(1.0 - x0 * cand) - c >= np.log(u)
        w[pending[ok]] = cand[ok]
        pending = pending[~ok]
    return w


def vmf_sample(eta, omega, rng, size=None):
    """Draw from vMF(eta, omega); omega = 0 gives the uniform distribution"""
    eta = np.asarray(eta, dtype=float)
    d = eta.size
    n = 1 if size is None else int(size)

    if omega == 0:
        g = rng.standard_normal((n, d))
        out = g / np.linalg.norm(g, axis=1, keepdims=True)
    else:
        w = _wood_rejection(float(omega), d, n, rng)
        v = rng.standard_normal((n, d))
        v -= np.outer(v @ eta, eta)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        out = w[:, None] * eta + np.sqrt(np.clip(1.0 - w ** 2, 0.0, None))[:, None] * v
    return out[0] if size is None else out
