"""
Spherical Factor Model System
=============================

Main orchestration class for the Spherical Factor Model Toolkit.
"""

import logging
import os

import numpy as np
import pandas as pd
from scipy import stats

import config
from modules import diagnostics, model, postprocess, sampler
from modules.data_manager import DataManager, write_json
from modules.distributions import HyperpriorConfig
from modules.errors import DomainError, NumericalIncidentCounter

logger = logging.getLogger(__name__)


class SphericalFactorSystem:
    """
    Orchestrates the modules of the toolkit

    Integrates:
    - Data Management (roll calls, scenarios, chain files)
    - Posterior Sampling (GHMC for the sphere, Gibbs for the Euclidean probit)
    - Post-processing (alignment, summaries, ranks)
    - Diagnostics (DIC, accuracy, PNS, Gelman-Rubin, prior studies)
    """

    def __init__(self, output_dir=None, n_jobs=None, verbose=True):
        self.output_dir = output_dir or config.OUTPUT_DIR
        self.n_jobs = n_jobs or config.THREADS
        self.verbose = verbose
        self.data_manager = DataManager()
        self.votes = None
        self.chains = []

        if verbose:
            print("=" * 80)
            print(f"{config.SYSTEM_NAME.upper()} INITIALIZED")
            print("=" * 80)
            print("🔧 System Components:")
            print("   • Data Management Module")
            print("   • Posterior Sampling Module")
            print("   • Post-processing Module")
            print("   • Diagnostics Module")
            print("=" * 80)

    def _path(self, name):
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, name)

    # ------------------------------------------------------------------
    # Data
    # ------------------------------------------------------------------

    def load_data(self, data_path, fmt='csv-wide', missing_threshold=config.MISSING_THRESHOLD):
        """Load a roll-call file and drop low-participation subjects"""
        votes = self.data_manager.load_vote_matrix(data_path, fmt)
        votes, dropped = self.data_manager.filter_low_participation(votes, missing_threshold)
        if dropped and self.verbose:
            print(f"⚠ Dropped {len(dropped)} subject(s) missing more than {missing_threshold:.0%} of votes")
        self.votes = votes
        return votes

    def simulate(self, spec, seed):
        print("\n" + "=" * 60)
        print(f"SIMULATING SCENARIO {spec.name.upper()}")
        print("=" * 60)
        votes, truth = self.data_manager.simulate_scenario(spec, seed)
        self.data_manager.save_dataset(votes, truth, spec, seed, self.output_dir)
        self.data_manager.describe_vote_matrix(votes)
        print(f"✓ Dataset written to {self.output_dir}")
        self.votes = votes
        return votes, truth

    # ------------------------------------------------------------------
    # Fitting
    # ------------------------------------------------------------------

    def fit(self, K, model_name='spherical', chains=1, seed=0, hyperpriors=None, ghmc=None,
            settings=None, chain_format='csv', run_config=None):
        """
        Run the chains, write chain files, posterior summaries, an acceptance
        report and a manifest. Returns a dict with the chains, R-hat and paths.
        """
        if self.votes is None:
            raise DomainError("Data not loaded. Please run load_data() first.")
        settings = settings or sampler.SamplerSettings()
        hyperpriors = hyperpriors or HyperpriorConfig()

        print("\n" + "=" * 60)
        print(f"FITTING {model_name.upper()} MODEL, K={K}, {chains} CHAIN(S)")
        print("=" * 60)

        if model_name == 'spherical':
            kwargs = {'hyperpriors': hyperpriors, 'ghmc': ghmc or sampler.GhmcConfig(),
                      'settings': settings}
        else:
            kwargs = {'iterations': settings.iterations, 'burn_in': settings.burn_in,
                      'thin': settings.thin, 'progress': settings.progress}
        fitted = sampler.run_chains(self.votes, K, chains=chains, seed=seed, model_name=model_name,
                                    n_jobs=self.n_jobs, **kwargs)
        self.chains = fitted
        tag = f"{model_name}_K{K}"

        chain_paths = []
        for c, chain in enumerate(fitted):
            ext = 'csv' if chain_format == 'csv' else 'bin'
            path = self._path(f"chain_{tag}_{c + 1}.{ext}")
            self.data_manager.save_chain(chain, path, fmt=chain_format)
            chain_paths.append(path)
        print(f"✓ {len(chain_paths)} chain file(s) written")

        acceptance = pd.DataFrame([
            {'chain': c + 1, 'block': name, 'rate': value}
            for c, chain in enumerate(fitted)
            for name, value in chain.acceptance.items() if np.isscalar(value)
        ])
        acceptance.to_csv(self._path(f"acceptance_{tag}.csv"), index=False)

        pooled = diagnostics.pool_chains(fitted)
        if model_name == 'spherical' and pooled.n_samples:
            summary = postprocess.summarize(postprocess.align(pooled))
            summary['positions'].to_csv(self._path(f"positions_{tag}.csv"), index=False)
            hyper, curves = postprocess.summarize_hyperparameters(pooled, hyperpriors)
            hyper.to_csv(self._path(f"hyperparameters_{tag}.csv"), index=False)
            curves.to_csv(self._path(f"hyperprior_curves_{tag}.csv"), index=False)
            print("✓ Aligned posterior summaries written")

        rhat = None
        if chains >= 2 and pooled.n_samples >= 2 * chains:
            rhat = diagnostics.gelman_rubin([chain.loglik for chain in fitted])
            print(f"   Gelman-Rubin R-hat (log-likelihood): {rhat:.4f}")
        not_converged = rhat is not None and rhat > config.RHAT_WARN_THRESHOLD
        if not_converged:
            logger.warning(f"R-hat {rhat:.3f} exceeds {config.RHAT_WARN_THRESHOLD}")
            print(f"⚠ R-hat {rhat:.3f} exceeds {config.RHAT_WARN_THRESHOLD}; chains may not have converged")

        counter = NumericalIncidentCounter()
        for chain in fitted:
            counter.merge(NumericalIncidentCounter.from_dict(chain.incidents))
        incidents = counter.to_dict()
        if any(incidents.values()):
            print(f"⚠ Numerical incidents: {incidents}")

        manifest = {
            'version': config.VERSION,
            'command': 'fit',
            'run_config': run_config or {},
            'model': model_name,
            'K': K,
            'master_seed': seed,
            'chain_seeds': [chain.seed for chain in fitted],
            'chain_files': [os.path.basename(p) for p in chain_paths],
            'data_hash': self.votes.data_hash(),
            'rhat': rhat,
            'not_converged': not_converged,
            'incidents': incidents,
        }
        write_json(manifest, self._path(f"manifest_{tag}.json"))
        print(f"✓ Manifest written to {self._path(f'manifest_{tag}.json')}")
        return {'chains': fitted, 'rhat': rhat, 'not_converged': not_converged,
                'chain_paths': chain_paths}

    # ------------------------------------------------------------------
    # Diagnostics and reports
    # ------------------------------------------------------------------

    def diagnose(self, chain_paths, out_name='model_comparison.csv', pns=True):
        """Long-format (model, K, metric, value) table over the given chain files"""
        if self.votes is None:
            raise DomainError("Data not loaded. Please run load_data() first.")
        print("\n" + "=" * 60)
        print("MODEL COMPARISON")
        print("=" * 60)
        groups = {}
        for path in chain_paths:
            chain = self.data_manager.load_chain(path)
            groups.setdefault((chain.model, chain.K), []).append(chain)
        tables = [diagnostics.model_metrics(group, self.votes, pns=pns) for group in groups.values()]
        table = pd.concat(tables, ignore_index=True)
        table.to_csv(self._path(out_name), index=False)
        for (model_name, K), _ in groups.items():
            rows = table[(table['model'] == model_name) & (table['K'] == K)]
            values = dict(zip(rows['metric'], rows['value']))
            print(f"   {model_name:<10} K={K:<3} DIC={values['dic']:.2f} accuracy={values['accuracy']:.4f}")
        print(f"✓ Comparison table written to {self._path(out_name)}")
        return table

    def prior_study(self, prior, omega_values, tau_values, K_list, kappa, n, seed,
                    out_name='prior_variance.csv', histogram_K=None):
        """
        Var(theta) series over K for every (omega, tau) pair, and optionally a
        histogram of prior-predictive theta at one K under the hyperpriors.
        """
        if n < 2:
            raise DomainError("prior study needs n >= 2 draws per point")
        print("\n" + "=" * 60)
        print(f"PRIOR STUDY ({prior.upper()})")
        print("=" * 60)
        pairs = [(w, t) for w in omega_values for t in tau_values]
        streams = np.random.SeedSequence(seed).spawn(len(pairs) + 1)
        tables = []
        for (omega, tau), stream in zip(pairs, streams):
            rng = np.random.default_rng(stream)
            tables.append(diagnostics.prior_variance_study(prior, K_list, omega, tau, kappa, n, rng))
        table = pd.concat(tables, ignore_index=True)
        table.to_csv(self._path(out_name), index=False)
        print(f"✓ {len(pairs)} series over K={min(K_list)}..{max(K_list)} written to {self._path(out_name)}")

        result = {'variance': table}
        if histogram_K is not None:
            rng = np.random.default_rng(streams[-1])
            draws = self._prior_predictive(histogram_K, n, rng)
            histogram = diagnostics.theta_histogram(draws)
            histogram.to_csv(self._path(f"theta_histogram_K{histogram_K}.csv"), index=False)
            modes = diagnostics.theta_density_modes(draws)
            print(f"   Prior-predictive theta at K={histogram_K}: {modes} mode(s)")
            result.update({'histogram': histogram, 'modes': modes})
        return result

    @staticmethod
    def _prior_predictive(K, n, rng):
        return model.prior_predictive_theta(K, HyperpriorConfig(), n, rng)

    def compare_ranks(self, first_path, second_path, out_name='rank_comparison.csv'):
        """Per-subject median ranks from two K = 1 chains and their Spearman correlation"""
        print("\n" + "=" * 60)
        print("RANK COMPARISON")
        print("=" * 60)
        first = self.data_manager.load_chain(first_path)
        second = self.data_manager.load_chain(second_path)
        if first.K != 1 or second.K != 1:
            raise DomainError("Rank comparison needs two K = 1 chains")
        if first.data_hash != second.data_hash:
            logger.warning("Rank comparison of chains fitted to different data")
        ranks_a = self._chain_ranks(first)
        ranks_b = self._chain_ranks(second)
        labels = (first.model, second.model)
        if labels[0] == labels[1]:
            labels = (f"{labels[0]}_1", f"{labels[1]}_2")
        table = ranks_a.merge(ranks_b, on='subject_id', suffixes=(f'_{labels[0]}', f'_{labels[1]}'))
        table.to_csv(self._path(out_name), index=False)
        rho = float(stats.spearmanr(table.iloc[:, 1], table.iloc[:, 2])[0])
        print(f"✓ Spearman correlation of median ranks: {rho:.4f}")
        return table, rho

    @staticmethod
    def _chain_ranks(chain):
        if chain.model == 'euclidean':
            return postprocess.euclidean_ranks(chain)
        return postprocess.circular_ranks(postprocess.align(chain))

    def generate_summary_report(self):
        """Summary of the loaded data and the last fit"""
        if self.votes is None:
            raise DomainError("No data loaded for analysis")
        summary = self.data_manager.describe_vote_matrix(self.votes, verbose=False)
        if self.chains:
            summary.update({
                'model': self.chains[0].model,
                'K': self.chains[0].K,
                'chains': len(self.chains),
                'samples_per_chain': self.chains[0].n_samples,
                'mean_loglik': float(np.mean([c.loglik.mean() for c in self.chains])),
            })
        return summary
