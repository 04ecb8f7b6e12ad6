"""Tests for the dense linear-algebra substrate."""

import numpy as np
import pytest

from fidest.linalg import (
    DensityMatrix,
    herm_eig,
    kron,
    matrix_from_json,
    matrix_to_json,
    matrix_sqrt_psd,
    partial_trace,
    unitarity_error,
    zero_state,
)

from conftest import random_hermitian

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


class TestKron:
    def test_identity(self):
        assert np.array_equal(kron(I2, I2), np.eye(4))

    def test_basis_action_big_endian(self):
        # qubit 0 is most significant: X (x) I maps |00> to |10>
        state = kron(X, I2) @ zero_state(2)
        expected = np.zeros(4, dtype=complex)
        expected[2] = 1.0
        assert np.allclose(state, expected)

    @pytest.mark.parametrize("seed", range(5))
    def test_mixed_product_property(self, seed):
        # oracle: direct multiplication of the factors
        rng = np.random.default_rng(seed)
        a, b, c, d = (random_hermitian(rng, 2) + np.eye(2) for _ in range(4))
        lhs = kron(a, b) @ kron(c, d)
        rhs = kron(a @ c, b @ d)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_associativity(self):
        rng = np.random.default_rng(3)
        a, b, c = (random_hermitian(rng, 2) for _ in range(3))
        assert np.max(np.abs(kron(kron(a, b), c) - kron(a, kron(b, c)))) <= 1e-12

    def test_no_factors_rejected(self):
        with pytest.raises(ValueError):
            kron()


class TestPartialTrace:
    def test_product_state(self):
        rho = np.outer(zero_state(2), zero_state(2).conj())
        reduced = partial_trace(rho, [2, 2], keep=[0])
        assert np.allclose(reduced, [[1, 0], [0, 0]])

    def test_maximally_entangled(self):
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        reduced = partial_trace(np.outer(bell, bell.conj()), [2, 2], keep=[0])
        assert np.allclose(reduced, np.eye(2) / 2, atol=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_random_three_register_state(self, seed):
        # oracle: eigenvalues of the reduced matrix must be a distribution
        rng = np.random.default_rng(seed)
        psi = rng.standard_normal(2 * 4 * 2) + 1j * rng.standard_normal(2 * 4 * 2)
        psi /= np.linalg.norm(psi)
        reduced = partial_trace(np.outer(psi, psi.conj()), [2, 4, 2], keep=[0, 2])
        w = np.linalg.eigvalsh(reduced)
        assert abs(np.trace(reduced) - 1.0) <= 1e-10
        assert w[0] >= -1e-10

    def test_trace_all_subsystems_gives_scalar_trace(self):
        rng = np.random.default_rng(9)
        mat = random_hermitian(rng, 8)
        out = partial_trace(mat, [2, 2, 2], keep=[])
        assert out.shape == (1, 1)
        assert abs(out[0, 0] - np.trace(mat)) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            partial_trace(np.eye(4), [2, 4], keep=[0])

    def test_bad_keep_index(self):
        with pytest.raises(ValueError, match="keep indices"):
            partial_trace(np.eye(4), [2, 2], keep=[2])


class TestHermEig:
    def test_identity_spectrum(self):
        w, _ = herm_eig(I2)
        assert np.allclose(w, [1, 1])

    def test_pauli_z_spectrum(self):
        w, _ = herm_eig(Z)
        assert np.allclose(w, [-1, 1])

    @pytest.mark.parametrize("seed", range(4))
    def test_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        mat = random_hermitian(rng, 8)
        w, v = herm_eig(mat)
        assert np.max(np.abs((v * w) @ v.conj().T - mat)) <= 1e-8

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            herm_eig(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_density_matrix_eigenvalues_sum_to_one(self):
        from conftest import mixed_instance

        dm, _ = mixed_instance(2, 3, 17)
        w, _ = herm_eig(dm.matrix)
        assert abs(np.sum(w) - 1.0) <= 1e-10


class TestMatrixSqrtPsd:
    def test_identity(self):
        assert np.allclose(matrix_sqrt_psd(I2), I2)

    def test_diagonal(self):
        assert np.allclose(matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    @pytest.mark.parametrize("seed", range(4))
    def test_squaring_oracle(self, seed):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        psd = g @ g.conj().T
        s = matrix_sqrt_psd(psd)
        assert np.max(np.abs(s @ s - psd)) <= 1e-8

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(ValueError, match="PSD"):
            matrix_sqrt_psd(np.diag([1.0, -1e-6]))

    def test_clamps_tiny_negatives(self):
        s = matrix_sqrt_psd(np.diag([1.0, -5e-11]))
        assert np.allclose(s, np.diag([1.0, 0.0]))


class TestDensityMatrix:
    def test_valid(self):
        dm = DensityMatrix(np.eye(2) / 2)
        assert dm.dim == 2 and dm.num_qubits == 1
        assert abs(dm.purity() - 0.5) <= 1e-12

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(np.eye(2))

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))

    def test_rejects_non_psd(self):
        with pytest.raises(ValueError, match="PSD"):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError, match="power of two"):
            DensityMatrix(np.eye(3) / 3)

    def test_is_pure(self):
        assert DensityMatrix(np.diag([1.0, 0.0])).is_pure()
        assert not DensityMatrix(np.eye(2) / 2).is_pure()

    def test_matrix_is_immutable(self):
        dm = DensityMatrix(np.eye(2) / 2)
        with pytest.raises(ValueError):
            dm.matrix[0, 0] = 2.0


class TestMatrixJson:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        mat = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        back = matrix_from_json(matrix_to_json(mat))
        assert np.array_equal(back, mat)

    def test_rejects_wrong_entry_count(self):
        with pytest.raises(ValueError, match="entry count"):
            matrix_from_json({"rows": 2, "cols": 2, "re": [1.0], "im": [0.0]})

    def test_rejects_missing_field(self):
        with pytest.raises(ValueError, match="malformed"):
            matrix_from_json({"rows": 1, "cols": 1, "re": [1.0]})


def test_unitarity_error_flags_non_unitary():
    assert unitarity_error(np.eye(3)) <= 1e-15
    assert unitarity_error(2 * np.eye(2)) > 1.0
