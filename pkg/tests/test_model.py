"""
Unit Tests for the Model Module
===============================

Vote matrices, the spherical likelihood and priors, and the Euclidean
probit baseline.
"""

import unittest
import sys
import os

import numpy as np
from scipy import stats
from scipy.stats import special_ortho_group

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from modules import distributions as dist
from modules import model
from modules.errors import DimensionMismatchError, DomainError, NumericalIncidentCounter
from modules.geometry import cartesian_to_spherical, embed

PI2 = np.pi ** 2


def random_configuration(rng, I, J, d):
    def unit(n):
        x = rng.standard_normal((n, d))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    return model.LatentConfiguration(unit(I), unit(J), unit(J))


def random_votes(rng, I, J, missing=0.1):
    values = (rng.uniform(size=(I, J)) < 0.5).astype(float)
    values[rng.uniform(size=(I, J)) < missing] = np.nan
    return model.VoteMatrix.from_array(values)


class TestVoteMatrix(unittest.TestCase):
    """Test cases for VoteMatrix"""

    def test_missing_mask(self):
        """Test that NaN cells become unobserved zeros"""
        votes = model.VoteMatrix.from_array([[1, np.nan], [0, 1]])
        np.testing.assert_array_equal(votes.observed, [[True, False], [True, True]])
        self.assertEqual(votes.y[0, 1], 0.0)
        self.assertEqual(votes.n_missing, 1)
        self.assertTrue(np.isnan(votes.as_array()[0, 1]))
        self.assertEqual(votes.subject_ids, ['S1', 'S2'])

    def test_invalid_values(self):
        """Test that votes other than 0 or 1 raise"""
        with self.assertRaises(DomainError):
            model.VoteMatrix.from_array([[2.0, 1.0]])
        with self.assertRaises(DimensionMismatchError):
            model.VoteMatrix(np.zeros((2, 2)), np.ones((2, 3), dtype=bool))

    def test_subset_and_hash(self):
        """Test subsetting keeps ids and changes the hash"""
        votes = model.VoteMatrix.from_array([[1, 0, 1], [0, 0, 1]], ['a', 'b'], ['x', 'y', 'z'])
        sub = votes.subset(rows=[1], cols=[0, 2])
        self.assertEqual(sub.subject_ids, ['b'])
        self.assertEqual(sub.item_ids, ['x', 'z'])
        np.testing.assert_array_equal(sub.y, [[0.0, 1.0]])
        self.assertNotEqual(sub.data_hash(), votes.data_hash())
        self.assertEqual(votes.data_hash(), model.VoteMatrix(votes.y, votes.observed).data_hash())


class TestLikelihood(unittest.TestCase):
    """Test cases for e, theta and the spherical log-likelihood"""

    def setUp(self):
        """Set up test fixtures"""
        self.rng = np.random.default_rng(8)

    def test_compute_e_examples(self):
        """Test equal item positions, antipodes and the swap"""
        beta = np.array([0.0, 0.6, 0.8])
        psi = np.array([1.0, 0.0, 0.0])
        zeta = np.array([0.0, 0.0, 1.0])
        self.assertEqual(model.compute_e(psi, psi, beta), 0.0)
        self.assertAlmostEqual(model.compute_e(beta, -beta, beta), PI2, places=12)
        self.assertAlmostEqual(model.compute_e(psi, zeta, beta), -model.compute_e(zeta, psi, beta), places=14)
        with self.assertRaises(DimensionMismatchError):
            model.compute_e(psi, zeta, beta[:2])

    def test_theta_examples(self):
        """Test theta for psi = zeta and for the uniform link"""
        latent = random_configuration(self.rng, 3, 2, 3)
        latent.zeta[0] = latent.psi[0]
        hp = model.Hyperparams(1.0, 1.0, np.array([37.0, 1.0]), 1.0)
        self.assertAlmostEqual(model.theta(1, 0, latent, hp), 0.5, places=14)
        e = model.compute_e(latent.psi[1], latent.zeta[1], latent.beta[2])
        self.assertAlmostEqual(model.theta(2, 1, latent, hp), (e + PI2) / (2 * PI2), places=14)

        matrix = model.theta_matrix(latent, hp)
        self.assertAlmostEqual(matrix[2, 1], model.theta(2, 1, latent, hp), places=15)

    def test_all_missing(self):
        """Test that an all-missing matrix has log-likelihood 0"""
        votes = model.VoteMatrix(np.zeros((2, 3)), np.zeros((2, 3), dtype=bool))
        latent = random_configuration(self.rng, 2, 3, 3)
        hp = model.Hyperparams(1.0, 1.0, np.full(3, 5.0), 1.0)
        self.assertEqual(model.spherical_log_likelihood(votes, latent, hp), 0.0)

    def test_single_cell(self):
        """Test a single cell with theta = 1/2"""
        x = np.array([[1.0, 0.0]])
        latent = model.LatentConfiguration(x, x, x)
        hp = model.Hyperparams(1.0, 1.0, [4.0], 1.0)
        for vote in (0.0, 1.0):
            votes = model.VoteMatrix.from_array([[vote]])
            self.assertAlmostEqual(model.spherical_log_likelihood(votes, latent, hp), np.log(0.5), places=14)

    def test_brute_force(self):
        """Test the vectorized log-likelihood against a cell loop"""
        votes = random_votes(self.rng, 4, 5)
        latent = random_configuration(self.rng, 4, 5, 3)
        hp = model.Hyperparams(1.0, 1.0, self.rng.uniform(1, 20, 5), 1.0)
        total = 0.0
        for i in range(4):
            for j in range(5):
                if votes.observed[i, j]:
                    t = model.theta(i, j, latent, hp)
                    total += np.log(t) if votes.y[i, j] == 1 else np.log(1 - t)
        self.assertAlmostEqual(model.spherical_log_likelihood(votes, latent, hp), total, places=10)

    def test_nested_likelihood_equality(self):
        """Test that embedding a configuration one dimension up keeps the likelihood"""
        for d in (2, 3, 5):
            for _ in range(100):
                votes = random_votes(self.rng, 4, 6)
                latent = random_configuration(self.rng, 4, 6, d)
                hp = model.Hyperparams(1.0, 1.0, self.rng.uniform(0.5, 60, 6), 1.0)
                lifted = model.LatentConfiguration(embed(latent.beta), embed(latent.psi), embed(latent.zeta))
                low = model.spherical_log_likelihood(votes, latent, hp)
                high = model.spherical_log_likelihood(votes, lifted, hp)
                self.assertLessEqual(abs(low - high), 1e-12 * max(1.0, abs(low)))

    def test_rotation_invariance(self):
        """Test invariance under a common orthogonal transformation"""
        votes = random_votes(self.rng, 6, 8)
        latent = random_configuration(self.rng, 6, 8, 4)
        hp = model.Hyperparams(1.0, 1.0, self.rng.uniform(1, 30, 8), 1.0)
        R = special_ortho_group.rvs(4, random_state=3)
        R[:, 0] *= -1.0
        self.assertAlmostEqual(model.spherical_log_likelihood(votes, latent, hp),
                               model.spherical_log_likelihood(votes, latent.rotate(R), hp), delta=1e-9)

    def test_theta_floor(self):
        """Test that theta = 0 at an observed cell is floored and counted"""
        beta = np.array([[1.0, 0.0]])
        latent = model.LatentConfiguration(beta, -beta, beta)
        hp = model.Hyperparams(1.0, 1.0, [5.0], 1.0)
        counter = NumericalIncidentCounter()
        votes = model.VoteMatrix.from_array([[1.0]])
        with self.assertLogs('modules.model', level='WARNING'):
            ll = model.spherical_log_likelihood(votes, latent, hp, counter)
        self.assertEqual(ll, np.log(1e-300))
        self.assertEqual(counter.theta_floored, 1)
        with self.assertNoLogs('modules.model', level='WARNING'):
            self.assertEqual(model.spherical_log_likelihood(votes, latent, hp), np.log(1e-300))

    def test_shape_mismatch(self):
        """Test that configuration and data shapes must agree"""
        votes = random_votes(self.rng, 3, 3)
        latent = random_configuration(self.rng, 2, 3, 3)
        hp = model.Hyperparams(1.0, 1.0, np.ones(3), 1.0)
        with self.assertRaises(DimensionMismatchError):
            model.spherical_log_likelihood(votes, latent, hp)


class TestPriors(unittest.TestCase):
    """Test cases for latent priors, hyperpriors and prior prediction"""

    def setUp(self):
        """Set up test fixtures"""
        self.rng = np.random.default_rng(21)
        self.cfg = dist.HyperpriorConfig()

    def test_poles_give_maximum(self):
        """Test the prior of a configuration sitting at the pole"""
        K = 3
        pole = np.zeros((1, K + 1))
        pole[0, 0] = 1.0
        latent = model.LatentConfiguration(np.repeat(pole, 4, 0), np.repeat(pole, 2, 0), np.repeat(pole, 2, 0))
        hp = model.Hyperparams(2.0, 3.0, np.ones(2), 1.0)
        per_subject = dist.svm_log_density_angles(np.zeros(K), dist.svm_precisions(2.0, K))
        per_item = dist.svm_log_density_angles(np.zeros(K), dist.svm_precisions(3.0, K))
        self.assertAlmostEqual(model.log_prior_latent(latent, hp), 4 * per_subject + 4 * per_item, places=10)

    def test_one_dimensional_prior_is_von_mises(self):
        """Test that K = 1 reduces to von Mises densities"""
        latent = random_configuration(self.rng, 3, 2, 2)
        hp = model.Hyperparams(1.7, 0.6, np.ones(2), 1.0)
        expected = (np.sum(stats.vonmises.logpdf(cartesian_to_spherical(latent.beta)[:, 0], 1.7))
                    + np.sum(stats.vonmises.logpdf(cartesian_to_spherical(latent.psi)[:, 0], 0.6))
                    + np.sum(stats.vonmises.logpdf(cartesian_to_spherical(latent.zeta)[:, 0], 0.6)))
        self.assertAlmostEqual(model.log_prior_latent(latent, hp), expected, places=10)

    def test_larger_precision_concentrates(self):
        """Test that doubling omega shrinks the angles of prior draws"""
        low = cartesian_to_spherical(model.sample_prior_positions(20000, 3, 1.0, self.rng))
        high = cartesian_to_spherical(model.sample_prior_positions(20000, 3, 2.0, self.rng))
        self.assertTrue(np.all(np.mean(np.abs(high), axis=0) < np.mean(np.abs(low), axis=0)))

    def test_hyperprior_rate_convention(self):
        """Test Gam(1, b) density at 0+ equals b and nonpositive values give -inf"""
        self.assertAlmostEqual(np.exp(dist.gamma_log_density(1e-12, 1.0, 5.0)), 5.0, places=9)
        hp = model.Hyperparams(1.0, 1.0, [1.0, -1.0], 1.0)
        self.assertEqual(model.log_hyperprior(hp, self.cfg), -np.inf)
        hp = model.Hyperparams(2.0, 0.5, [3.0, 4.0], 0.01)
        expected = (stats.gamma.logpdf(2.0, 1.0, scale=10.0) + stats.gamma.logpdf(0.5, 1.0, scale=0.2)
                    + np.sum(stats.gamma.logpdf([3.0, 4.0], 1.0, scale=100.0))
                    + stats.gamma.logpdf(0.01, 2.0, scale=1 / 150.0))
        self.assertAlmostEqual(model.log_hyperprior(hp, self.cfg), expected, places=10)

    def test_prior_predictive_mean(self):
        """Test E(theta) = 1/2 under the symmetric item prior"""
        for K in (1, 3):
            draws = model.prior_predictive_theta(K, self.cfg, 10000, self.rng)
            se = draws.std() / np.sqrt(draws.size)
            self.assertLess(abs(draws.mean() - 0.5), 4 * se)
        fixed = model.prior_predictive_theta(10, self.cfg, 10000, self.rng, omega=20, tau=20, kappa=200)
        self.assertLess(abs(fixed.mean() - 0.5), 4 * fixed.std() / 100.0)
        with self.assertRaises(DomainError):
            model.prior_predictive_theta(2, self.cfg, 0, self.rng)


class TestEuclideanBaseline(unittest.TestCase):
    """Test cases for the probit factor model"""

    def setUp(self):
        """Set up test fixtures"""
        self.rng = np.random.default_rng(13)

    def test_zero_parameters(self):
        """Test theta = 1/2 everywhere when mu and alpha vanish"""
        params = model.EuclideanParams(np.zeros(3), np.zeros((3, 2)), self.rng.standard_normal((4, 2)))
        np.testing.assert_array_equal(model.euclidean_theta_matrix(params), np.full((4, 3), 0.5))

    def test_brute_force(self):
        """Test the probit log-likelihood against a 3 x 3 loop"""
        votes = random_votes(self.rng, 3, 3, missing=0.2)
        params = model.EuclideanParams(self.rng.standard_normal(3), self.rng.standard_normal((3, 2)),
                                       self.rng.standard_normal((3, 2)))
        total = 0.0
        for i in range(3):
            for j in range(3):
                if votes.observed[i, j]:
                    p = stats.norm.cdf(params.mu[j] + params.alpha[j] @ params.beta[i])
                    total += np.log(p) if votes.y[i, j] == 1 else np.log(1 - p)
        self.assertAlmostEqual(model.euclidean_probit_log_likelihood(votes, params), total, places=10)

    def test_prior_variances(self):
        """Test the prior variances and the partial-sum variance identity"""
        var_mu, var_alpha, var_beta = model.euclidean_prior_variances(3)
        self.assertEqual((var_mu, var_alpha), (0.5, 0.5))
        np.testing.assert_allclose(var_beta, 6.0 / (np.pi * np.arange(1, 4)) ** 2)
        self.assertLess(abs(model.euclidean_prior_z_variance(25) - 1.0), 0.01)
        self.assertLess(abs(model.euclidean_prior_z_variance(100000) - 1.0), 1e-5)

    def test_bilinear_mapping(self):
        """Test ||b - zeta||^2 - ||b - psi||^2 = mu + alpha'b"""
        psi = self.rng.standard_normal((5, 3))
        zeta = self.rng.standard_normal((5, 3))
        b = self.rng.standard_normal(3)
        mu, alpha = model.utilities_to_bilinear(psi, zeta)
        direct = np.sum((b - zeta) ** 2, axis=1) - np.sum((b - psi) ** 2, axis=1)
        np.testing.assert_allclose(mu + alpha @ b, direct, atol=1e-12)

    def test_prior_sample_shapes(self):
        """Test the shapes of prior draws"""
        params = model.sample_euclidean_prior(7, 4, 2, self.rng)
        self.assertEqual(params.beta.shape, (7, 2))
        self.assertEqual(params.alpha.shape, (4, 2))
        self.assertEqual(params.mu.shape, (4,))


if __name__ == '__main__':
    unittest.main()
