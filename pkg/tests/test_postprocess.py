"""
Unit Tests for the Postprocess Module
=====================================

Alignment of spherical samples and posterior summaries.
"""

import unittest
import sys
import os

import numpy as np
from scipy.stats import ortho_group

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from modules import distributions as dist
from modules import model
from modules import postprocess
from modules.errors import DomainError
from modules.sampler import ChainOutput


def rotated_chain(truth, n_samples, rng, noise=0.0, kappa=5.0):
    """Chain whose samples are random orthogonal transforms of truth, optionally jittered"""
    d = truth.beta.shape[1]
    draws = {block: [] for block in ('beta', 'psi', 'zeta')}
    for _ in range(n_samples):
        Q = ortho_group.rvs(d, random_state=rng)
        for block in draws:
            x = getattr(truth, block) + noise * rng.standard_normal(getattr(truth, block).shape)
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            draws[block].append(x @ Q.T)
    I, J = truth.beta.shape[0], truth.psi.shape[0]
    samples = {block: np.array(values) for block, values in draws.items()}
    samples.update({
        'omega': rng.gamma(4.0, 0.5, n_samples), 'tau': rng.gamma(4.0, 0.5, n_samples),
        'kappa': np.full((n_samples, J), kappa), 'lam': rng.gamma(2.0, 1.0, n_samples),
    })
    return ChainOutput(
        model='spherical', K=d - 1, samples=samples, loglik=rng.normal(-50.0, 1.0, n_samples),
        acceptance={}, seed=0,
        subject_ids=[f"S{i + 1}" for i in range(I)], item_ids=[f"V{j + 1}" for j in range(J)],
    )


class TestAlignment(unittest.TestCase):
    """Test cases for reflection fixing and Procrustes alignment"""

    def setUp(self):
        """Set up test fixtures"""
        self.rng = np.random.default_rng(31)
        self.truth = model.sample_prior_configuration(8, 6, 2, 1.0, 1.0, self.rng)
        self.chain = rotated_chain(self.truth, 25, self.rng)

    def test_theta_invariant(self):
        """Test that alignment leaves every vote probability unchanged"""
        aligned = postprocess.align(self.chain)
        for s in range(self.chain.n_samples):
            hp = self.chain.hyperparams(s)
            before = model.theta_matrix(self.chain.latent(s), hp)
            after = model.theta_matrix(aligned.latent(s), hp)
            np.testing.assert_allclose(after, before, rtol=0, atol=1e-12)

    def test_rotations_collapse(self):
        """Test that pure rotations of one configuration align onto the reference sample"""
        aligned = postprocess.align(self.chain)
        reference = aligned.stacked(aligned.reference_sample)
        self.assertEqual(aligned.reference_sample, int(np.argmax(self.chain.loglik)))
        for s in range(aligned.n_samples):
            np.testing.assert_allclose(aligned.stacked(s), reference, atol=1e-10)
        self.assertEqual(aligned.steps, ['reflections', 'procrustes'])

    def test_alignment_to_truth(self):
        """Test alignment onto an explicit reference configuration"""
        aligned = postprocess.procrustes_align(self.chain, reference=self.truth)
        np.testing.assert_allclose(aligned.beta[3], self.truth.beta, atol=1e-10)
        self.assertIsNone(aligned.reference_sample)

    def test_reflections(self):
        """Test that the reference subject ends up with nonnegative coordinates"""
        before = self.chain.samples['beta'].copy()
        aligned = postprocess.fix_reflections(self.chain, reference_subject=2)
        self.assertTrue(np.all(aligned.beta[:, 2, :] >= 0.0))
        self.assertEqual(aligned.reference_subject, 2)
        np.testing.assert_array_equal(self.chain.samples['beta'], before)

    def test_invalid_inputs(self):
        """Test method, reference-subject and model validation"""
        with self.assertRaises(DomainError):
            postprocess.align(self.chain, method='reflections+rotations')
        with self.assertRaises(DomainError):
            postprocess.fix_reflections(self.chain, reference_subject=99)
        euclidean = ChainOutput(model='euclidean', K=1, samples={}, loglik=np.zeros(0),
                                acceptance={}, seed=0)
        with self.assertRaises(DomainError):
            postprocess.align(euclidean)

    def test_objective(self):
        """Test the chordal objective on a known pair"""
        a = np.array([[1.0, 0.0], [0.0, 1.0]])
        b = np.array([[0.0, 1.0], [0.0, 1.0]])
        self.assertAlmostEqual(postprocess.procrustes_objective(a, b), 2.0)


class TestSummaries(unittest.TestCase):
    """Test cases for position, rank and hyperparameter summaries"""

    def setUp(self):
        """Set up test fixtures"""
        self.rng = np.random.default_rng(5)

    def test_summarize_layout(self):
        """Test the long position table and theta means"""
        truth = model.sample_prior_configuration(5, 4, 2, 2.0, 2.0, self.rng)
        aligned = postprocess.align(rotated_chain(truth, 10, self.rng, noise=0.05))
        summary = postprocess.summarize(aligned)
        table = summary['positions']
        self.assertEqual(len(table), (5 + 2 * 4) * 2)
        self.assertTrue(np.all(table['angle_lower'] <= table['angle_upper'] + 1e-12))
        self.assertEqual(set(table['role']), {'beta', 'psi', 'zeta'})
        self.assertEqual(summary['theta_mean'].shape, (5, 4))
        self.assertTrue(np.all((summary['theta_mean'] >= 0) & (summary['theta_mean'] <= 1)))
        norms = np.linalg.norm(summary['mean_positions'].beta, axis=1)
        np.testing.assert_allclose(norms, 1.0)

    def test_circular_ranks(self):
        """Test that median ranks are a permutation for a rigid configuration"""
        truth = model.sample_prior_configuration(7, 3, 1, 1.0, 1.0, self.rng)
        aligned = postprocess.align(rotated_chain(truth, 15, self.rng))
        ranks = postprocess.circular_ranks(aligned)
        self.assertEqual(list(ranks['subject_id']), [f"S{i + 1}" for i in range(7)])
        self.assertEqual(sorted(ranks['median_rank']), list(range(1, 8)))

    def test_circular_ranks_needs_circle(self):
        """Test that K > 1 raises"""
        truth = model.sample_prior_configuration(4, 3, 2, 1.0, 1.0, self.rng)
        with self.assertRaises(DomainError):
            postprocess.circular_ranks(postprocess.align(rotated_chain(truth, 3, self.rng)))

    def test_euclidean_ranks_orientation(self):
        """Test that sign-flipped samples give the same ranks"""
        points = self.rng.standard_normal(6)
        beta = np.array([points, -points, points])[:, :, None]
        chain = ChainOutput(model='euclidean', K=1, samples={'beta': beta}, loglik=np.zeros(3),
                            acceptance={}, seed=0, subject_ids=list('abcdef'))
        ranks = postprocess.euclidean_ranks(chain)
        np.testing.assert_array_equal(ranks['median_rank'], np.argsort(np.argsort(points)) + 1)

    def test_hyperparameter_summary(self):
        """Test the hyperparameter table and prior curves"""
        truth = model.sample_prior_configuration(4, 3, 1, 1.0, 1.0, self.rng)
        chain = rotated_chain(truth, 50, self.rng)
        summary, curves = postprocess.summarize_hyperparameters(chain, dist.HyperpriorConfig(), grid_size=20)
        self.assertEqual(list(summary['parameter']), ['omega', 'tau', 'inv_lambda', 'inv_omega'])
        self.assertAlmostEqual(summary.loc[0, 'mean'], chain.samples['omega'].mean())
        self.assertTrue(np.all(summary['q2.5'] <= summary['q97.5']))
        self.assertTrue(np.all(curves['prior_density'] >= 0))
        self.assertEqual(set(curves['parameter']), set(summary['parameter']))

    def test_interval_coverage(self):
        """Test that jittered truth is covered by the credible intervals"""
        truth = model.sample_prior_configuration(10, 5, 2, 1.0, 1.0, self.rng)
        chain = rotated_chain(truth, 200, self.rng, noise=0.05)
        result = postprocess.interval_coverage(chain, truth)
        self.assertEqual(result['n'], 10 * 2)
        self.assertGreaterEqual(result['coverage'], 0.9)
        self.assertLessEqual(result['ci_low'], result['coverage'])


if __name__ == '__main__':
    unittest.main()
