"""
Unit Tests for the Command-Line Front End
=========================================
"""

import unittest
import sys
import os
import json
import tempfile

import pandas as pd

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from modules import cli


def read_bytes(path):
    with open(path, 'rb') as fh:
        return fh.read()


class TestArgumentTypes(unittest.TestCase):
    """Test cases for argument parsing helpers"""

    def test_int_list(self):
        """Test ranges and comma lists"""
        self.assertEqual(cli.int_list('1-4'), [1, 2, 3, 4])
        self.assertEqual(cli.int_list('2,5,10'), [2, 5, 10])
        for bad in ('0-3', 'a-b', ''):
            with self.assertRaises(cli.argparse.ArgumentTypeError):
                cli.int_list(bad)

    def test_scalar_types(self):
        """Test positive, nonnegative and fraction parsing"""
        self.assertEqual(cli.positive_int('3'), 3)
        self.assertEqual(cli.nonnegative_int('0'), 0)
        self.assertEqual(cli.fraction('0.4'), 0.4)
        self.assertEqual(cli.float_list('0.5,2'), [0.5, 2.0])
        for fn, bad in ((cli.positive_int, '0'), (cli.nonnegative_int, '-1'),
                        (cli.fraction, '1.5'), (cli.fraction, 'x'), (cli.positive_float, '0'),
                        (cli.float_list, '1,-2'), (cli.scenario_name, 'sphere0'),
                        (cli.scenario_name, 'cube2')):
            with self.assertRaises(cli.argparse.ArgumentTypeError, msg=f"{fn.__name__}({bad})"):
                fn(bad)

    def test_run_config_seeds(self):
        """Test that chain seeds are derived from the master seed"""
        run = cli.RunConfig(chains=3, seed=5)
        self.assertEqual(run.seeds, cli.chain_seeds(5, 3))
        self.assertEqual(run.to_dict()['chains'], 3)


class TestCommands(unittest.TestCase):
    """Test cases for the subcommands and exit codes"""

    def setUp(self):
        """Set up test fixtures"""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.data_dir = os.path.join(self.tmp.name, 'data')
        code = cli.main(['simulate', '--scenario', 'sphere1', '-I', '10', '-J', '20',
                         '--seed', '3', '--output-dir', self.data_dir])
        self.assertEqual(code, 0)
        self.votes = os.path.join(self.data_dir, 'votes.csv')

    def _path(self, *parts):
        return os.path.join(self.tmp.name, *parts)

    def _fit(self, out, *extra):
        return cli.main(['fit', '--data', self.votes, '-K', '1', '--iterations', '200',
                         '--burn-in', '50', '--seed', '4', '--no-progress',
                         '--output-dir', self._path(out), *extra])

    def test_usage_errors(self):
        """Test exit code 2 for invalid arguments"""
        self.assertEqual(cli.main(['simulate', '--scenario', 'sphere0']), 2)
        self.assertEqual(cli.main(['fit', '--data', self.votes, '-K', '0']), 2)
        self.assertEqual(cli.main(['fit', '--data', self.votes]), 2)
        self.assertEqual(cli.main(['prior-study', '-n', '0']), 2)
        self.assertEqual(cli.main(['explode']), 2)

    def test_simulate_files(self):
        """Test declared shapes and identical files for a repeated seed"""
        votes = pd.read_csv(self.votes)
        self.assertEqual(votes.shape, (10, 21))
        for name in ('truth_theta.csv', 'truth_beta.csv', 'manifest.json'):
            self.assertTrue(os.path.exists(os.path.join(self.data_dir, name)), name)
        again = self._path('again')
        cli.main(['simulate', '--scenario', 'sphere1', '-I', '10', '-J', '20', '--seed', '3',
                  '--output-dir', again])
        for name in ('votes.csv', 'truth_beta.csv', 'manifest.json'):
            self.assertEqual(read_bytes(os.path.join(again, name)),
                             read_bytes(os.path.join(self.data_dir, name)), name)

    def test_fit_deterministic(self):
        """Test the smoke fit and byte-identical chain files for a fixed seed"""
        self.assertEqual(self._fit('run1'), 0)
        self.assertEqual(self._fit('run2'), 0)
        chain = 'chain_spherical_K1_1.csv'
        self.assertEqual(read_bytes(self._path('run1', chain)), read_bytes(self._path('run2', chain)))
        with open(self._path('run1', 'manifest_spherical_K1.json')) as fh:
            manifest = json.load(fh)
        self.assertEqual(manifest['master_seed'], 4)
        self.assertEqual(manifest['run_config']['iterations'], 200)
        self.assertEqual(manifest['chain_files'], [chain])

    def test_missing_input(self):
        """Test exit code 1 for a missing data file"""
        code = cli.main(['fit', '--data', self._path('absent.csv'), '-K', '1',
                         '--output-dir', self._path('out')])
        self.assertEqual(code, 1)

    def test_diagnose_and_ranks(self):
        """Test the comparison table and a chain compared with itself"""
        self.assertEqual(self._fit('run', '--chains', '2', '--iterations', '40', '--burn-in', '10'), 0)
        chains = [self._path('run', f'chain_spherical_K1_{c}.csv') for c in (1, 2)]
        code = cli.main(['diagnose', '--data', self.votes, '--chains', *chains,
                         '--output-dir', self._path('run')])
        self.assertEqual(code, 0)
        table = pd.read_csv(self._path('run', 'model_comparison.csv'))
        self.assertEqual(list(table.columns), ['model', 'K', 'metric', 'value'])
        self.assertIn('rhat', set(table['metric']))
        self.assertFalse(table.duplicated(['model', 'K', 'metric']).any())

        code = cli.main(['compare-ranks', chains[0], chains[0], '--output-dir', self._path('run')])
        self.assertEqual(code, 0)
        ranks = pd.read_csv(self._path('run', 'rank_comparison.csv'))
        self.assertEqual(len(ranks), 10)
        self.assertTrue((ranks.iloc[:, 1] == ranks.iloc[:, 2]).all())

    def test_prior_study(self):
        """Test the 3 x 3 grid of series and the manifest"""
        out = self._path('prior')
        code = cli.main(['prior-study', '--omega', '0.5,2,10', '--tau', '0.5,2,10',
                         '--dimensions', '1-3', '-n', '50', '--seed', '2', '--output-dir', out])
        self.assertEqual(code, 0)
        table = pd.read_csv(os.path.join(out, 'prior_variance.csv'))
        self.assertEqual(len(table.groupby(['omega', 'tau'])), 9)
        self.assertEqual(len(table), 27)
        with open(os.path.join(out, 'manifest_prior_study.json')) as fh:
            self.assertEqual(json.load(fh)['seed'], 2)

    def test_config_file(self):
        """Test that config-file values apply and flags win"""
        settings = self._path('run.cfg')
        with open(settings, 'w') as fh:
            fh.write("# fit settings\niterations = 30\nburn_in = 5\nchains = 2\nno_progress = true\n")
        code = cli.main(['--config', settings, 'fit', '--data', self.votes, '-K', '1',
                         '--chains', '1', '--seed', '1', '--output-dir', self._path('cfg')])
        self.assertEqual(code, 0)
        with open(self._path('cfg', 'manifest_spherical_K1.json')) as fh:
            run = json.load(fh)['run_config']
        self.assertEqual((run['iterations'], run['burn_in'], run['chains']), (30, 5, 1))

        with open(settings, 'a') as fh:
            fh.write("colour = blue\n")
        self.assertEqual(cli.main(['--config', settings, 'fit', '--data', self.votes, '-K', '1']), 2)


class TestEnvironmentCheck(unittest.TestCase):
    """Test cases for the setup verification script"""

    def setUp(self):
        """Set up test fixtures"""
        import importlib.util

        root = os.path.join(os.path.dirname(__file__), '..')
        spec = importlib.util.spec_from_file_location('environment_check', os.path.join(root, 'setup.py'))
        self.check = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(self.check)
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_read_requirements(self):
        """Test that pins and comments are stripped from requirement lines"""
        path = os.path.join(self.tmp.name, 'requirements.txt')
        with open(path, 'w') as fh:
            fh.write("# numerics\nnumpy>=1.24.0\n\nscikit-learn>=1.3.0  # KDE\ntqdm\n")
        self.assertEqual(self.check.read_requirements(path), ['numpy', 'scikit-learn', 'tqdm'])

    def test_project_requirements(self):
        """Test the shipped requirements and source tree"""
        names = self.check.read_requirements()
        for name in ('numpy', 'pandas', 'scipy', 'scikit-learn', 'joblib', 'tqdm'):
            self.assertIn(name, names)
        self.assertEqual(self.check.missing_packages(['numpy', 'scikit-learn']), [])
        self.assertEqual(self.check.missing_files(), [])
        self.assertIn('src/modules/cli.py', self.check.missing_files(self.tmp.name))


if __name__ == '__main__':
    unittest.main()
