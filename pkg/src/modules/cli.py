"""
Command-line front end
======================

Subcommands: simulate, fit, diagnose, prior-study, compare-ranks.

Settings come from flags, then from an optional key=value file given with
--config, then from config.py. Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

import argparse
import logging
import os
import re
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

import config
from modules.data_manager import ScenarioSpec, write_json
from modules.distributions import HyperpriorConfig
from modules.errors import SphericalModelError
from modules.sampler import GhmcConfig, SamplerSettings, chain_seeds
from spherical_system import SphericalFactorSystem

logger = logging.getLogger(__name__)

HYPERPRIOR_KEYS = ('a_omega', 'b_omega', 'a_tau', 'b_tau', 'a_lambda', 'b_lambda', 'c')


@dataclass
class RunConfig:
    """Everything a fit depends on; echoed verbatim into the fit manifest"""
    model: str = 'spherical'
    K: int = 1
    iterations: int = config.DEFAULT_ITERATIONS
    burn_in: int = config.DEFAULT_BURN_IN
    thin: int = config.DEFAULT_THIN
    chains: int = 1
    seed: int = 0
    seeds: list = field(default_factory=list)
    hyperprior_preset: str = 'default'
    hyperpriors: dict = field(default_factory=dict)
    ghmc_preset: int = 0
    data: str = ''
    data_format: str = 'csv-wide'
    missing_threshold: float = config.MISSING_THRESHOLD
    chain_format: str = 'csv'
    output_dir: str = config.OUTPUT_DIR
    threads: int = config.THREADS

    def __post_init__(self):
        if self.chains < 1:
            raise SphericalModelError("chains must be at least 1")
        if not self.seeds:
            self.seeds = chain_seeds(self.seed, self.chains)

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------

def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def nonnegative_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {value}")
    return value


def positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def fraction(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a fraction in [0, 1], got {value}")
    return value


def int_list(text):
    """'1-30' or '2,5,10'"""
    try:
        if '-' in text and ',' not in text:
            low, high = (int(v) for v in text.split('-', 1))
            values = list(range(low, high + 1))
        else:
            values = [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range like 1-30 or a list like 2,5,10, got '{text}'")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return values


def float_list(text):
    try:
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got '{text}'")
    if not values or min(values) <= 0:
        raise argparse.ArgumentTypeError("values must be positive")
    return values


def scenario_name(text):
    """sphere<K> or euclidean<K> with K >= 1"""
    match = re.fullmatch(r'(sphere|euclidean)(\d+)', text.strip().lower())
    if not match or int(match.group(2)) < 1:
        raise argparse.ArgumentTypeError(f"expected sphere<K> or euclidean<K> with K >= 1, got '{text}'")
    return text.strip().lower()


def read_config_file(path):
    """key=value lines; blank lines and lines starting with # are skipped"""
    values = {}
    with open(path) as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                raise SphericalModelError(f"{path}:{number}: expected key=value")
            key, value = (part.strip() for part in line.split('=', 1))
            values[key.replace('-', '_')] = value
    return values


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(parser):
    parser.add_argument('--output-dir', default=None, help='output directory (default from config)')
    parser.add_argument('--seed', type=nonnegative_int, default=None,
                        help='master seed; generated and recorded when omitted')


def _add_data(parser):
    parser.add_argument('--data', required=True, help='vote file')
    parser.add_argument('--format', dest='data_format', choices=['csv-wide', 'csv-long'],
                        default='csv-wide')
    parser.add_argument('--missing-threshold', type=fraction, default=config.MISSING_THRESHOLD)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='spherical-factor',
        description=f"{config.SYSTEM_NAME}: Bayesian factor models on hyperspheres",
    )
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--config', default=None, help='key=value settings file; flags win')
    parser.add_argument('--threads', type=positive_int, default=config.THREADS)
    sub = parser.add_subparsers(dest='command', required=True)

    simulate = sub.add_parser('simulate', help='generate a synthetic scenario')
    _add_common(simulate)
    simulate.add_argument('--scenario', type=scenario_name, required=True, help='sphere<K> or euclidean<K>')
    simulate.add_argument('--subjects', '-I', dest='I', type=positive_int, default=config.SCENARIO_SUBJECTS)
    simulate.add_argument('--items', '-J', dest='J', type=positive_int, default=config.SCENARIO_ITEMS)
    simulate.add_argument('--precision', type=positive_float, default=config.SCENARIO_PRECISION)
    simulate.add_argument('--kappa', type=positive_float, default=config.SCENARIO_KAPPA)

    fit = sub.add_parser('fit', help='sample the posterior of one model')
    _add_common(fit)
    _add_data(fit)
    fit.add_argument('--model', choices=['spherical', 'euclidean'], default='spherical')
    fit.add_argument('-K', '--dimension', dest='K', type=positive_int, required=True)
    fit.add_argument('--iterations', type=nonnegative_int, default=config.DEFAULT_ITERATIONS)
    fit.add_argument('--burn-in', type=nonnegative_int, default=config.DEFAULT_BURN_IN)
    fit.add_argument('--thin', type=positive_int, default=config.DEFAULT_THIN)
    fit.add_argument('--chains', type=positive_int, default=1)
    fit.add_argument('--hyperpriors', choices=sorted(config.HYPERPRIOR_PRESETS), default='default')
    for key in HYPERPRIOR_KEYS:
        fit.add_argument(f"--{key.replace('_', '-')}", dest=key, type=positive_float, default=None)
    fit.add_argument('--ghmc-preset', type=int, choices=[0, 1], default=0)
    fit.add_argument('--chain-format', choices=['csv', 'binary'], default='csv')
    fit.add_argument('--no-progress', action='store_true')

    diagnose = sub.add_parser('diagnose', help='DIC, accuracy, PNS and R-hat tables')
    _add_data(diagnose)
    diagnose.add_argument('--output-dir', default=None)
    diagnose.add_argument('--chains', dest='chain_files', nargs='+', required=True)
    diagnose.add_argument('--out', default='model_comparison.csv')
    diagnose.add_argument('--no-pns', action='store_true')

    prior = sub.add_parser('prior-study', help='Monte Carlo studies of the prior on theta')
    _add_common(prior)
    prior.add_argument('--prior', choices=['vmf', 'svm', 'euclidean'], default='svm')
    prior.add_argument('--omega', type=float_list, default=[0.5, 2.0, 10.0])
    prior.add_argument('--tau', type=float_list, default=[0.5, 2.0, 10.0])
    prior.add_argument('--dimensions', type=int_list, default=list(range(1, 31)))
    prior.add_argument('--kappa', type=positive_float, default=config.SCENARIO_KAPPA)
    prior.add_argument('-n', '--draws', dest='n', type=positive_int, default=100000)
    prior.add_argument('--histogram-K', dest='histogram_K', type=positive_int, default=None)
    prior.add_argument('--out', default='prior_variance.csv')

    ranks = sub.add_parser('compare-ranks', help='median ranks from two K = 1 chains')
    ranks.add_argument('--output-dir', default=None)
    ranks.add_argument('first', help='chain file (typically the circular model)')
    ranks.add_argument('second', help='chain file (typically the 1-D Euclidean model)')
    ranks.add_argument('--out', default='rank_comparison.csv')

    return parser, sub.choices


def parse_args(argv=None):
    """Two passes: locate --config, then re-parse with file values as defaults"""
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            file_values = read_config_file(args.config)
        except OSError as exc:
            parser.error(f"cannot read config file: {exc}")
        except SphericalModelError as exc:
            parser.error(str(exc))
        target = subparsers[args.command]
        known = {action.dest for action in target._actions} | {'threads', 'log_level'}
        unknown = sorted(set(file_values) - known)
        if unknown:
            parser.error(f"unknown config keys: {unknown}")
        top = {k: v for k, v in file_values.items() if k in ('threads', 'log_level')}
        parser.set_defaults(**top)
        target.set_defaults(**{k: v for k, v in file_values.items() if k not in top})
        args = parser.parse_args(argv)
    return args


def _resolve_seed(args):
    if getattr(args, 'seed', None) is None:
        args.seed = int(np.random.SeedSequence().generate_state(1)[0])
        logger.info(f"No seed given; using generated seed {args.seed}")
    return args.seed


def _as_bool(value):
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ('1', 'true', 'yes', 'on')


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _system(args):
    return SphericalFactorSystem(output_dir=args.output_dir or config.OUTPUT_DIR,
                                 n_jobs=args.threads)


def cmd_simulate(args):
    spec = ScenarioSpec.from_name(args.scenario, I=args.I, J=args.J,
                                  precision=args.precision, kappa=args.kappa)
    seed = _resolve_seed(args)
    system = _system(args)
    system.simulate(spec, seed)
    return 0


def cmd_fit(args):
    seed = _resolve_seed(args)
    preset = HyperpriorConfig.from_preset(args.hyperpriors).to_dict()
    preset.update({key: getattr(args, key) for key in HYPERPRIOR_KEYS if getattr(args, key) is not None})
    hyperpriors = HyperpriorConfig(**preset)
    run = RunConfig(
        model=args.model, K=args.K, iterations=args.iterations, burn_in=args.burn_in,
        thin=args.thin, chains=args.chains, seed=seed, hyperprior_preset=args.hyperpriors,
        hyperpriors=hyperpriors.to_dict(), ghmc_preset=args.ghmc_preset, data=args.data,
        data_format=args.data_format, missing_threshold=args.missing_threshold,
        chain_format=args.chain_format, output_dir=args.output_dir or config.OUTPUT_DIR,
        threads=args.threads,
    )
    settings = SamplerSettings(iterations=args.iterations, burn_in=args.burn_in, thin=args.thin,
                               progress=not _as_bool(args.no_progress))

    system = _system(args)
    system.load_data(args.data, args.data_format, args.missing_threshold)
    result = system.fit(args.K, model_name=args.model, chains=args.chains, seed=seed,
                        hyperpriors=hyperpriors, ghmc=GhmcConfig.from_preset(args.ghmc_preset),
                        settings=settings, chain_format=args.chain_format,
                        run_config=run.to_dict())
    if result['not_converged']:
        logger.warning("Fit finished but R-hat is above the threshold; see the manifest")
    return 0


def cmd_diagnose(args):
    system = _system(args)
    system.load_data(args.data, args.data_format, args.missing_threshold)
    system.diagnose(args.chain_files, out_name=args.out, pns=not _as_bool(args.no_pns))
    return 0


def cmd_prior_study(args):
    seed = _resolve_seed(args)
    system = _system(args)
    system.prior_study(args.prior, args.omega, args.tau, args.dimensions, args.kappa, args.n, seed,
                       out_name=args.out, histogram_K=args.histogram_K)
    manifest = {
        'version': config.VERSION, 'command': 'prior-study', 'seed': seed, 'prior': args.prior,
        'omega': args.omega, 'tau': args.tau, 'dimensions': args.dimensions,
        'kappa': args.kappa, 'n': args.n, 'histogram_K': args.histogram_K,
    }
    write_json(manifest, os.path.join(system.output_dir, 'manifest_prior_study.json'))
    return 0


def cmd_compare_ranks(args):
    system = _system(args)
    system.compare_ranks(args.first, args.second, out_name=args.out)
    return 0


COMMANDS = {
    'simulate': cmd_simulate,
    'fit': cmd_fit,
    'diagnose': cmd_diagnose,
    'prior-study': cmd_prior_study,
    'compare-ranks': cmd_compare_ranks,
}


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except (SphericalModelError, OSError) as exc:
        logger.error(str(exc))
        print(f"⚠ Error: {exc}", file=sys.stderr)
        return 1
