"""tensor_algebra のユニットテスト"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))
from physics.composite_model import HilbertLayout
from physics.errors import LayoutError, ValidationError
from physics.tensor_algebra import (
    commutator,
    dagger,
    ensure_hermitian,
    expectation,
    gibbs_exp,
    hermitian_eig,
    is_hermitian,
    kron,
    kron_all,
    matrix_function,
    partial_trace,
    random_density,
    random_hermitian,
    unitary_exp,
)


class TestBasicOperations:
    """基本演算のテスト"""

    def test_dagger(self):
        """エルミート共役が転置共役であること"""
        m = np.array([[1, 2j], [3, 4 - 1j]])
        np.testing.assert_allclose(dagger(m), np.array([[1, 3], [-2j, 4 + 1j]]))

    def test_kron_dimension(self):
        """テンソル積の次元が積になること"""
        assert kron(np.eye(3), np.eye(2)).shape == (6, 6)
        assert kron_all([np.eye(2), np.eye(3), np.eye(2)]).shape == (12, 12)

    def test_commutator_of_pauli(self):
        """[σ_x, σ_y] = 2iσ_z であること"""
        sx = np.array([[0, 1], [1, 0]])
        sy = np.array([[0, -1j], [1j, 0]])
        sz = np.diag([1, -1])
        np.testing.assert_allclose(commutator(sx, sy), 2j * sz)

    def test_commutator_dimension_mismatch(self):
        """次元が異なる交換子は ValidationError になること"""
        with pytest.raises(ValidationError):
            commutator(np.eye(2), np.eye(3))

    def test_non_square_rejected(self):
        """正方でない行列は拒否されること"""
        with pytest.raises(ValidationError):
            ensure_hermitian(np.ones((2, 3)))

    def test_non_hermitian_rejected(self):
        """エルミートでない行列は拒否されること"""
        with pytest.raises(ValidationError):
            ensure_hermitian(np.array([[0, 1], [0, 0]]), "L")

    def test_expectation(self):
        """Tr{ρX} が期待値を与えること"""
        rho = np.diag([0.25, 0.75])
        assert expectation(rho, np.diag([-1.0, 1.0])) == pytest.approx(0.5)


class TestPartialTrace:
    """部分トレースのテスト"""

    def test_product_state(self, rng):
        """積状態の部分トレースが因子を返すこと"""
        a, b, c = random_density(3, rng), random_density(2, rng), random_density(2, rng)
        layout = HilbertLayout.from_dims(3, 2, 2)
        rho = kron_all([a, b, c])
        np.testing.assert_allclose(partial_trace(rho, layout, {"S"}), b, atol=1e-14)
        np.testing.assert_allclose(partial_trace(rho, layout, {"D", "E"}), kron(a, c), atol=1e-14)

    def test_bell_state(self):
        """ベル状態の部分トレースがどちらの側でも I/2 になること"""
        psi = np.array([1.0, 0.0, 0.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
        rho = np.outer(psi, psi.conj())
        layout = HilbertLayout.from_dims(2, 2)
        np.testing.assert_allclose(partial_trace(rho, layout, {"S"}), np.eye(2) / 2, atol=1e-15)
        np.testing.assert_allclose(partial_trace(rho, layout, {"D"}), np.eye(2) / 2, atol=1e-15)

    def test_keep_all_returns_copy(self, rng):
        """全スロットを残すと同じ行列になること"""
        layout = HilbertLayout.from_dims(2, 2)
        rho = random_density(4, rng)
        np.testing.assert_allclose(partial_trace(rho, layout, {"D", "S"}), rho)

    def test_trace_preserved(self, rng):
        """部分トレースがトレースを保つこと"""
        layout = HilbertLayout.from_dims(3, 2, 2)
        rho = random_density(12, rng)
        assert np.trace(partial_trace(rho, layout, {"S"})) == pytest.approx(1.0)

    def test_dimension_mismatch(self, rng):
        """次元の積が合わなければ LayoutError になること"""
        layout = HilbertLayout.from_dims(3, 2)
        with pytest.raises(LayoutError):
            partial_trace(random_density(4, rng), layout, {"S"})

    def test_unknown_slot(self, rng):
        """未知のスロットは LayoutError になること"""
        layout = HilbertLayout.from_dims(2, 2)
        with pytest.raises(LayoutError):
            partial_trace(random_density(4, rng), layout, {"E"})

    def test_empty_keep(self, rng):
        """空のスロット指定は LayoutError になること"""
        layout = HilbertLayout.from_dims(2, 2)
        with pytest.raises(LayoutError):
            partial_trace(random_density(4, rng), layout, set())


class TestMatrixFunctions:
    """行列関数のテスト"""

    def test_eig_reconstruct(self, rng):
        """固有分解から元の行列を再構成できること"""
        h = random_hermitian(5, rng)
        np.testing.assert_allclose(hermitian_eig(h).reconstruct(), h, atol=1e-12)

    def test_unitary_exp_is_unitary(self, rng):
        """e^{−iHt} がユニタリであること"""
        u = unitary_exp(random_hermitian(4, rng), 1.7)
        np.testing.assert_allclose(dagger(u) @ u, np.eye(4), atol=1e-12)

    def test_unitary_exp_of_pauli(self):
        """e^{−iσ_z t} が対角の位相になること"""
        t = 0.3
        u = unitary_exp(np.diag([1.0, -1.0]), t)
        np.testing.assert_allclose(np.diag(u), [np.exp(-1j * t), np.exp(1j * t)])

    def test_gibbs_diagonal(self):
        """対角ハミルトニアンで e^{−βε_n} を返すこと"""
        g = gibbs_exp(np.diag([100.0, 101.0]), 1.0)
        assert g[0, 0].real == pytest.approx(np.exp(-100.0))
        assert g[1, 1].real / g[0, 0].real == pytest.approx(np.exp(-1.0))

    def test_log_inverts_gibbs(self, rng):
        """log(e^{−βH}) = −βH であること"""
        h = random_hermitian(3, rng)
        np.testing.assert_allclose(matrix_function(gibbs_exp(h, 0.7), "log"), -0.7 * h, atol=1e-10)

    def test_log_requires_positive(self):
        """正定値でない行列の log は ValidationError になること"""
        with pytest.raises(ValidationError):
            matrix_function(np.diag([1.0, 0.0]), "log")

    def test_unknown_kind(self):
        """未知の種類は ValidationError になること"""
        with pytest.raises(ValidationError):
            matrix_function(np.eye(2), "sqrt")

    def test_random_density_is_state(self, rng):
        """乱数密度行列がエルミート・単位トレースであること"""
        rho = random_density(6, rng, rank=2)
        assert is_hermitian(rho)
        assert np.trace(rho).real == pytest.approx(1.0)
