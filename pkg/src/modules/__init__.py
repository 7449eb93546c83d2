"""
Spherical Factor Model Modules
==============================

This package contains the core modules of the Spherical Factor Model Toolkit.
"""

from .data_manager import DataManager, ScenarioSpec
from .distributions import HyperpriorConfig
from .errors import NumericalIncidentCounter, SphericalModelError
from .model import EuclideanParams, Hyperparams, LatentConfiguration, VoteMatrix
from .sampler import ChainOutput, GhmcConfig, SamplerSettings, run_chain, run_chains, run_euclidean_chain

__all__ = [
    'DataManager',
    'ScenarioSpec',
    'HyperpriorConfig',
    'NumericalIncidentCounter',
    'SphericalModelError',
    'EuclideanParams',
    'Hyperparams',
    'LatentConfiguration',
    'VoteMatrix',
    'ChainOutput',
    'GhmcConfig',
    'SamplerSettings',
    'run_chain',
    'run_chains',
    'run_euclidean_chain',
]
