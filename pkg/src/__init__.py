"""
Spherical Factor Model Toolkit
==============================

Bayesian factor models for binary data with latent positions on hyperspheres,
with a Euclidean probit baseline for comparison.
"""

__version__ = "1.0.0"
