import numpy as np
from django.test import SimpleTestCase

from hamiltonian_learning.chain_model import (DensityMatrix, OperatorKind, apply_operator_sum,
                                              assemble_hamiltonian, chain_length, embed_bond,
                                              energy_variance, entanglement_entropy, entanglement_profile,
                                              expectation, ground_state, reduced_density_matrix,
                                              schmidt_probabilities, von_neumann_entropy)
from hamiltonian_learning.exceptions import ConvergenceError, DomainError
from hamiltonian_learning.lanczos import lanczos_ground_state
from hamiltonian_learning.su4_algebra import (SITE_DIM, XVBS_THETA, build_bond_hamiltonian, build_exchange,
                                              build_squared_exchange)


def dense_bond_sum(bond, length):
    return sum(embed_bond(bond, site, length) for site in range(length - 1)).toarray()


def random_state(length, seed):
    psi = np.random.default_rng(seed).standard_normal(SITE_DIM ** length)
    return psi / np.linalg.norm(psi)


class AssemblyTests(SimpleTestCase):
    def test_single_bond(self):
        hamiltonian = assemble_hamiltonian(2, 0.7)
        self.assertEqual(hamiltonian.dim, 36)
        np.testing.assert_allclose(hamiltonian.matrix.toarray(), build_bond_hamiltonian(0.7).matrix, atol=1e-15)

    def test_symmetric_and_sparse(self):
        hamiltonian = assemble_hamiltonian(4, 0.3)
        self.assertEqual(abs(hamiltonian.matrix - hamiltonian.matrix.T).max(), 0)
        self.assertLessEqual(hamiltonian.nnz, 3 * 36 ** 2 * 6 ** 2)

    def test_mirror_symmetry_of_open_chain(self):
        dense = assemble_hamiltonian(3, 0.0).matrix.toarray()
        mirrored = dense.reshape((6,) * 6).transpose(2, 1, 0, 5, 4, 3).reshape(216, 216)
        np.testing.assert_allclose(mirrored, dense, atol=1e-14)

    def test_length_guard(self):
        for length in (1, 10):
            with self.assertRaises(DomainError):
                assemble_hamiltonian(length, 0.1)

    def test_chain_length(self):
        self.assertEqual(chain_length(np.zeros(6 ** 3)), 3)
        with self.assertRaises(DomainError):
            chain_length(np.zeros(37))


class GroundStateTests(SimpleTestCase):
    def test_single_bond_energy(self):
        result = ground_state(assemble_hamiltonian(2, 0.0))
        self.assertAlmostEqual(result.energy, np.linalg.eigvalsh(build_exchange().matrix)[0], delta=1e-10)

    def test_dense_oracle_at_four_sites(self):
        hamiltonian = assemble_hamiltonian(4, 0.3)
        result = ground_state(hamiltonian, tol=1e-10)
        exact = np.linalg.eigvalsh(hamiltonian.matrix.toarray())[0]
        self.assertLessEqual(abs(result.energy - exact), 1e-10)
        self.assertAlmostEqual(np.linalg.norm(result.vector), 1.0, delta=1e-12)
        self.assertLessEqual(result.residual, 1e-10)
        self.assertLessEqual(energy_variance(hamiltonian, result.vector), 1e-9)

    def test_variance_bound(self):
        hamiltonian = assemble_hamiltonian(4, 1.1)
        result = ground_state(hamiltonian, tol=1e-8)
        self.assertLessEqual(energy_variance(hamiltonian, result.vector), 10 * 1e-8 ** 2)

    def test_reports_ritz_values_and_gap(self):
        result = ground_state(assemble_hamiltonian(4, 0.3), k=4)
        self.assertEqual(len(result.ritz_values), 4)
        self.assertEqual(result.ritz_values, tuple(sorted(result.ritz_values)))
        self.assertEqual(len(result.degeneracy_report['gaps']), 3)
        self.assertGreaterEqual(result.gap, 0.0)

    def test_seeded_runs_are_identical(self):
        first = ground_state(assemble_hamiltonian(3, 0.2), seed=99)
        second = ground_state(assemble_hamiltonian(3, 0.2), seed=99)
        self.assertTrue(np.array_equal(first.vector, second.vector))

    def test_argument_validation(self):
        hamiltonian = assemble_hamiltonian(2, 0.0)
        with self.assertRaises(DomainError):
            ground_state(hamiltonian, tol=0.0)
        with self.assertRaises(DomainError):
            ground_state(hamiltonian, k=1)

    def test_non_convergence_carries_diagnostics(self):
        with self.assertRaises(ConvergenceError) as ctx:
            ground_state(assemble_hamiltonian(4, 0.3), tol=1e-14, krylov_dim=2, max_restarts=0)
        self.assertEqual(ctx.exception.iterations, 2)
        self.assertGreater(ctx.exception.residual, 1e-14)
        self.assertIn('residual', ctx.exception.diagnostics())

    def test_scaled_operator_keeps_ground_vector(self):
        hamiltonian = assemble_hamiltonian(3, 0.4)
        plain = lanczos_ground_state(hamiltonian.matvec, hamiltonian.dim)
        scaled = lanczos_ground_state(lambda v: 2.5 * hamiltonian.matvec(v), hamiltonian.dim)
        self.assertAlmostEqual(scaled.energy, 2.5 * plain.energy, delta=1e-9)


class GappedXvbsPointTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.result = ground_state(assemble_hamiltonian(6, XVBS_THETA), k=6)

    def test_gap_above_ground_multiplet(self):
        self.assertEqual(len(self.result.ritz_values), 6)
        self.assertGreater(self.result.gap, 0.0)


class OperatorSumTests(SimpleTestCase):
    def test_eigenvector_is_scaled(self):
        hamiltonian = assemble_hamiltonian(4, 0.3)
        result = ground_state(hamiltonian)
        image = apply_operator_sum(OperatorKind.HAMILTONIAN, result.vector, theta=0.3)
        self.assertLessEqual(np.linalg.norm(image - result.energy * result.vector), 1e-9)

    def test_matches_sparse_matvec(self):
        psi = random_state(4, 1)
        hamiltonian = assemble_hamiltonian(4, 0.8)
        image = apply_operator_sum(OperatorKind.HAMILTONIAN, psi, theta=0.8)
        self.assertLessEqual(np.abs(image - hamiltonian.matvec(psi)).max(), 1e-12)

    def test_linearity(self):
        a, b = 0.3, -1.7
        psi1, psi2 = random_state(3, 2), random_state(3, 3)
        for kind in OperatorKind:
            combined = apply_operator_sum(kind, a * psi1 + b * psi2, theta=0.5)
            separate = a * apply_operator_sum(kind, psi1, theta=0.5) + b * apply_operator_sum(kind, psi2, theta=0.5)
            self.assertLessEqual(np.abs(combined - separate).max(), 1e-12)

    def test_exchange_expectation_matches_dense(self):
        psi = ground_state(assemble_hamiltonian(4, 0.0)).vector
        dense = dense_bond_sum(build_exchange().matrix, 4)
        self.assertLessEqual(abs(expectation(OperatorKind.EXCHANGE_SUM, psi) - psi @ dense @ psi), 1e-10)

    def test_squared_exchange_sum_matches_dense(self):
        psi = random_state(4, 4)
        dense = dense_bond_sum(build_squared_exchange().matrix, 4)
        image = apply_operator_sum(OperatorKind.SQUARED_EXCHANGE_SUM, psi)
        self.assertLessEqual(np.abs(image - dense @ psi).max(), 1e-10)

    def test_dimension_mismatch(self):
        with self.assertRaises(DomainError):
            apply_operator_sum(OperatorKind.EXCHANGE_SUM, np.ones(37))
        with self.assertRaises(DomainError):
            apply_operator_sum(OperatorKind.EXCHANGE_SUM, np.ones(36), length=3)

    def test_hamiltonian_needs_theta(self):
        with self.assertRaises(DomainError):
            apply_operator_sum(OperatorKind.HAMILTONIAN, np.ones(36))


class ReducedStateTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.psi6 = ground_state(assemble_hamiltonian(6, 0.3)).vector

    def test_product_state_is_pure(self):
        psi = np.zeros(6 ** 4)
        psi[0] = 1.0
        rho = reduced_density_matrix(psi, 2)
        self.assertTrue(rho.is_valid())
        self.assertAlmostEqual(entanglement_entropy(rho), 0.0, delta=1e-14)
        self.assertEqual(np.linalg.matrix_rank(rho.matrix), 1)

    def test_maximally_mixed_entropy(self):
        rho = DensityMatrix(matrix=np.eye(36) / 36, block=(1, 2))
        self.assertAlmostEqual(entanglement_entropy(rho), np.log(36), delta=1e-12)

    def test_dense_partial_trace_oracle(self):
        psi = ground_state(assemble_hamiltonian(4, 0.3)).vector
        full = np.outer(psi, psi).reshape(36, 36, 36, 36)
        oracle = np.trace(full, axis1=1, axis2=3)
        rho = reduced_density_matrix(psi, 2)
        self.assertLessEqual(np.abs(rho.matrix - oracle).max(), 1e-10)

    def test_svd_and_density_matrix_spectra_agree(self):
        rho = reduced_density_matrix(self.psi6, 3)
        self.assertTrue(rho.is_valid())
        self.assertEqual(rho.dim, 216)
        eigenvalues = np.sort(rho.eigenvalues)[::-1]
        np.testing.assert_allclose(eigenvalues, schmidt_probabilities(self.psi6, 3), atol=1e-10)

    def test_complement_spectrum_matches(self):
        for ell in range(1, 6):
            rho_a = reduced_density_matrix(self.psi6, ell)
            rho_b = reduced_density_matrix(self.psi6, ell, complement=True)
            self.assertEqual(rho_b.block, (ell + 1, 6))
            self.assertAlmostEqual(entanglement_entropy(rho_a), entanglement_entropy(rho_b), delta=1e-9)
            size = min(rho_a.dim, rho_b.dim)
            np.testing.assert_allclose(np.sort(rho_a.eigenvalues)[-size:], np.sort(rho_b.eigenvalues)[-size:],
                                       atol=1e-10)

    def test_partial_trace_consistency(self):
        bond = build_bond_hamiltonian(0.3).matrix
        rho = reduced_density_matrix(self.psi6, 3)
        restricted = np.kron(bond, np.eye(SITE_DIM))
        padded = embed_bond(bond, 0, 6) @ self.psi6
        self.assertAlmostEqual(np.trace(rho.matrix @ restricted), self.psi6 @ padded, delta=1e-10)

    def test_block_range(self):
        with self.assertRaises(DomainError):
            reduced_density_matrix(self.psi6, 0)
        with self.assertRaises(DomainError):
            reduced_density_matrix(self.psi6, 6)

    def test_entropy_cutoff(self):
        self.assertEqual(von_neumann_entropy([1.0, 1e-16, 0.0]), 0.0)


class RandomizedSymmetryTests(SimpleTestCase):
    def test_twenty_random_cases_at_four_sites(self):
        rng = np.random.default_rng(2024)
        for case in range(20):
            theta = float(rng.uniform(-np.pi, np.pi))
            ell = int(rng.integers(1, 4))
            hamiltonian = assemble_hamiltonian(4, theta)
            dense = hamiltonian.matrix.toarray()
            reference = np.add.reduce([embed_bond(build_bond_hamiltonian(theta).matrix, s, 4).toarray()
                                       for s in range(3)])
            psi = ground_state(hamiltonian, seed=case).vector
            with self.subTest(theta=theta, ell=ell):
                self.assertLessEqual(np.abs(dense - reference).max(), 1e-10)
                self.assertLessEqual(np.abs(hamiltonian.matvec(psi) - dense @ psi).max(), 1e-10)
                rho_a = reduced_density_matrix(psi, ell)
                rho_b = reduced_density_matrix(psi, ell, complement=True)
                self.assertAlmostEqual(entanglement_entropy(rho_a), entanglement_entropy(rho_b), delta=1e-9)


class EntropyProfileTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.psi = ground_state(assemble_hamiltonian(7, 0.1)).vector

    def test_profile_length(self):
        self.assertEqual(len(entanglement_profile(self.psi)), 6)

    def test_mirror_symmetric_profile(self):
        profile = np.array(entanglement_profile(self.psi))
        np.testing.assert_allclose(profile, profile[::-1], atol=1e-8)

    def test_sawtooth_on_each_half(self):
        # cuts 3 and 4 are mirror images, so alternation is checked on cuts 1..3 and 4..6
        profile = np.array(entanglement_profile(self.psi))
        for half in (profile[:3], profile[3:]):
            steps = np.diff(half)
            self.assertLess(steps[0] * steps[1], 0)
        self.assertGreater(profile[0], profile[1])
        self.assertLess(profile[1], profile[2])


class KrylovMemoryCapTests(SimpleTestCase):
    def test_basis_is_capped_and_restarts_still_converge(self):
        hamiltonian = assemble_hamiltonian(3, 0.3)
        reference = np.linalg.eigvalsh(hamiltonian.matrix.toarray())[0]
        with self.assertLogs('hamiltonian_learning.lanczos', 'WARNING') as logs:
            result = lanczos_ground_state(hamiltonian.matvec, hamiltonian.dim, tol=1e-8, krylov_dim=100,
                                          max_restarts=300, max_basis_bytes=12 * 8 * hamiltonian.dim)
        self.assertIn('capped at 12', logs.output[0])
        self.assertAlmostEqual(result.energy, reference, delta=1e-8)
