"""
Configuration Module
====================

Configuration settings for the Spherical Factor Model Toolkit.
"""

import os

# System Settings
SYSTEM_NAME = "Spherical Factor Model Toolkit"
VERSION = "1.0.0"
CHAIN_FORMAT_VERSION = 1

# Output Settings
OUTPUT_DIR = os.environ.get('SPHERICAL_FACTOR_OUTPUT_DIR', 'output/')
THREADS = int(os.environ.get('SPHERICAL_FACTOR_THREADS', '1'))

# Numerical Tolerances
UNIT_NORM_TOL = 1e-12
DEGENERATE_PREFIX_TOL = 1e-300
SINGULAR_PREFIX_TOL = 1e-14
THETA_FLOOR = 1e-300
ARCCOS_GUARD = 1e-12        # 1 - d^2 below this uses the limit of arccos(d)/sqrt(1-d^2)
LAST_COORD_GUARD = 1e-10    # |x_{K+1}| below this switches to the projected gradient
FD_STEP = 1e-6
RENORMALIZE_WARN = 1e-9

# Link Settings
LINK_STRICT = False

# Hyperpriors: Gam(shape, RATE) everywhere
DEFAULT_HYPERPRIORS = {
    'a_omega': 1.0, 'b_omega': 0.1,
    'a_tau': 1.0, 'b_tau': 5.0,
    'a_lambda': 2.0, 'b_lambda': 150.0,
    'c': 1.0,
}
ALTERNATIVE_HYPERPRIORS = {
    'a_omega': 1.0, 'b_omega': 0.1,
    'a_tau': 1.0, 'b_tau': 0.1,
    'a_lambda': 2.0, 'b_lambda': 25.0,
    'c': 1.0,
}
HYPERPRIOR_PRESETS = {
    'default': DEFAULT_HYPERPRIORS,
    'alternative': ALTERNATIVE_HYPERPRIORS,
}

# GHMC Settings
BETA_EPS_PRESETS = [(0.01, 0.03), (0.01, 0.05)]
ITEM_EPS_PRESETS = [(0.01, 0.07), (0.01, 0.105)]
LEAP_RANGE = (1, 10)
JITTER_PERIOD = 50
GHMC_TARGET_ACCEPTANCE = (0.60, 0.90)

# Metropolis-Hastings Settings
MH_TARGET_ACCEPTANCE = 0.40
MH_INITIAL_SD = 0.5
MH_ADAPT_EXPONENT = 0.6

# Chain Settings
DEFAULT_ITERATIONS = 20000
DEFAULT_BURN_IN = 10000
DEFAULT_THIN = 1
RHAT_WARN_THRESHOLD = 1.1

# Initialization
INIT_OMEGA = 1.0
INIT_TAU = 1.0

# Simulation Settings
SCENARIO_PRECISION = 2.0
SCENARIO_KAPPA = 50.0
SCENARIO_SUBJECTS = 100
SCENARIO_ITEMS = 700

# Roll Call Settings
MISSING_THRESHOLD = 0.4
YEA_CODES = ('1', '1.0', 'yea', 'y')
NAY_CODES = ('0', '0.0', 'nay', 'n')
MISSING_CODES = ('', 'na', 'nan', 'none', '.')

# Diagnostics Settings
ACCURACY_TIE_PREDICTS = 1
CREDIBLE_LEVEL = 0.95
