"""
Geometry Module
===============

Hypersphere S^K primitives: hyperspherical coordinates, geodesic distance,
tangent-space projection and the exact geodesic flow used by GHMC.

Every function accepts stacked inputs: the last axis is the coordinate axis,
leading axes are batch axes.
"""

import logging

import numpy as np

import config
from modules.errors import DegenerateCoordinateError, DimensionMismatchError, DomainError

logger = logging.getLogger(__name__)

_ANGLE_SLACK = 1e-12


def _check_same_dim(x, z):
    if x.shape[-1] != z.shape[-1]:
        raise DimensionMismatchError(
            f"Dimension mismatch: {x.shape[-1]} vs {z.shape[-1]}"
        )


def spherical_to_cartesian(phi):
    """
    Map K hyperspherical angles to a unit vector in R^{K+1}.

    x_1 = cos(phi_1) prod_{m>=2} cos(phi_m)
    x_2 = sin(phi_1) prod_{m>=2} cos(phi_m)
    x_{k+1} = sin(phi_k) prod_{m>k} cos(phi_m)      (2 <= k <= K)
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 0:
        phi = phi[None]
    K = phi.shape[-1]
    if K < 1:
        raise DomainError("At least one angle is required")

    if np.any(np.abs(phi[..., 0]) > np.pi + _ANGLE_SLACK):
        raise DomainError("phi_1 must lie in [-pi, pi]")
    if K > 1 and np.any(np.abs(phi[..., 1:]) > np.pi / 2 + _ANGLE_SLACK):
        raise DomainError("phi_k for k >= 2 must lie in [-pi/2, pi/2]")

    x = np.empty(phi.shape[:-1] + (K + 1,))
    tail = np.ones(phi.shape[:-1])
    for k in range(K - 1, 0, -1):
        x[..., k + 1] = np.sin(phi[..., k]) * tail
        tail = tail * np.cos(phi[..., k])
    x[..., 0] = np.cos(phi[..., 0]) * tail
    x[..., 1] = np.sin(phi[..., 0]) * tail
    return x


def cartesian_to_spherical(x, strict=True):
    """
    Inverse of spherical_to_cartesian.

    phi_1 = atan2(x_2, x_1) and phi_k = atan2(x_{k+1}, sqrt(x_1^2 + ... + x_k^2)).
    When x_1 = x_2 = 0 the leading angles are undetermined: strict mode
    raises, otherwise they are set to 0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise DimensionMismatchError("A unit vector needs at least 2 coordinates")
    norms = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        raise DomainError("cartesian_to_spherical expects unit vectors")

    prefix = np.cumsum(x ** 2, axis=-1)
    if x.shape[-1] > 2 and np.any(prefix[..., 1] < config.DEGENERATE_PREFIX_TOL):
        if strict:
            raise DegenerateCoordinateError(
                "Point lies on a pole of the coordinate system; angles are undetermined"
            )
        logger.debug("Degenerate hyperspherical coordinates resolved to 0")

    phi = np.empty(x.shape[:-1] + (x.shape[-1] - 1,))
    phi[..., 0] = np.arctan2(x[..., 1], x[..., 0])
    if x.shape[-1] > 2:
        phi[..., 1:] = np.arctan2(x[..., 2:], np.sqrt(prefix[..., 1:-1]))
    return phi


def geodesic_distance(x, z):
    """Great-circle angle arccos(x'z), with the dot product clamped into [-1, 1]."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_same_dim(x, z)
    dot = np.clip(np.sum(x * z, axis=-1), -1.0, 1.0)
    return np.arccos(dot)


def tangent_project(x, v):
    """(I - x x')v"""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_same_dim(x, v)
    return v - np.sum(x * v, axis=-1, keepdims=True) * x


def geodesic_flow(x, gamma, eps):
    """
    Follow the great circle through x with initial velocity gamma for time eps.

    Returns the new position and the transported velocity. Rows with zero
    velocity are returned unchanged.
    """
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    _check_same_dim(x, gamma)

    nu = np.linalg.norm(gamma, axis=-1, keepdims=True)
    moving = nu > 0.0
    safe_nu = np.where(moving, nu, 1.0)
    angle = safe_nu * eps
    cos_a = np.cos(angle)
    sin_a = np.sin(angle)

    x_new = x * cos_a + (gamma / safe_nu) * sin_a
    gamma_new = gamma * cos_a - safe_nu * x * sin_a
    x_new = np.where(moving, x_new, x)
    gamma_new = np.where(moving, gamma_new, gamma)
    return x_new, gamma_new


def log_map(base, x):
    """
    Riemannian logarithm: the tangent vector at `base` pointing toward `x`
    with length equal to their geodesic distance.
    """
    base = np.asarray(base, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_same_dim(base, x)
    v = tangent_project(base, x)
    v_norm = np.linalg.norm(v, axis=-1, keepdims=True)
    dist = geodesic_distance(base, x)[..., None]
    scale = np.where(v_norm > 0.0, dist / np.where(v_norm > 0.0, v_norm, 1.0), 0.0)
    return v * scale


def renormalize(x):
    """Project rows back to unit norm; returns (x, max |norm - 1| before projection)."""
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    drift = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    if drift > config.RENORMALIZE_WARN:
        logger.warning(f"Unit-norm drift {drift:.3e} corrected by renormalization")
    return x / norms, drift


def embed(x, extra=1):
    """Append `extra` zero coordinates so a point of S^{K-1} sits on the equator of S^K."""
    x = np.asarray(x, dtype=float)
    pad = np.zeros(x.shape[:-1] + (extra,))
    return np.concatenate([x, pad], axis=-1)
