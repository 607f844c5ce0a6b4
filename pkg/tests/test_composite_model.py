"""composite_model のユニットテスト"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))
from physics.composite_model import (
    CompositeHamiltonian,
    FactorizedCoupling,
    HilbertLayout,
    assemble_total,
    ensure_density,
    lift,
    product_state,
    random_composite,
)
from physics.errors import LayoutError, ValidationError
from physics.tensor_algebra import kron, kron_all, random_density, random_hermitian


class TestHilbertLayout:
    """レイアウトのテスト"""

    def test_from_dims(self):
        """D, S, E の順でレイアウトを作れること"""
        layout = HilbertLayout.from_dims(3, 2, 4)
        assert layout.labels == ("D", "S", "E")
        assert layout.total_dim == 24
        assert layout.has_environment

    def test_bipartite(self):
        """E なしのレイアウトを作れること"""
        layout = HilbertLayout.from_dims(5, 2)
        assert layout.labels == ("D", "S")
        assert not layout.has_environment
        assert layout.dim_of("D") == 5

    def test_wrong_order(self):
        """大域順でないスロットは LayoutError になること"""
        with pytest.raises(LayoutError):
            HilbertLayout(("S", "D"), (2, 3))

    def test_duplicate_label(self):
        """重複したラベルは LayoutError になること"""
        with pytest.raises(LayoutError):
            HilbertLayout(("D", "D"), (2, 2))

    def test_without(self):
        """スロットを除いたレイアウトを返すこと"""
        layout = HilbertLayout.from_dims(3, 2, 4).without("D")
        assert layout.labels == ("S", "E")
        assert layout.dims == (2, 4)

    def test_missing_slot(self):
        """存在しないスロットの問い合わせは LayoutError になること"""
        with pytest.raises(LayoutError):
            HilbertLayout.from_dims(3, 2).dim_of("E")


class TestLift:
    """埋め込みのテスト"""

    def test_lift_system(self):
        """S への埋め込みが I_D ⊗ A ⊗ I_E になること"""
        layout = HilbertLayout.from_dims(3, 2, 2)
        a = np.diag([1.0, -1.0])
        np.testing.assert_allclose(lift(a, layout, "S"), kron_all([np.eye(3), a, np.eye(2)]))

    def test_lift_wrong_dim(self):
        """スロット次元と合わない演算子は LayoutError になること"""
        with pytest.raises(LayoutError):
            lift(np.eye(3), HilbertLayout.from_dims(3, 2), "S")


class TestFactorizedCoupling:
    """因子化結合のテスト"""

    def test_assemble(self, rng):
        """B ⊗ A の和を全空間に組み立てること"""
        b, a = random_hermitian(3, rng), random_hermitian(2, rng)
        coupling = FactorizedCoupling(((b, a),), "D", "S")
        np.testing.assert_allclose(coupling.assemble(HilbertLayout.from_dims(3, 2)), kron(b, a))

    def test_non_hermitian_factor(self):
        """エルミートでない因子は ValidationError になること"""
        with pytest.raises(ValidationError):
            FactorizedCoupling(((np.array([[0, 1], [0, 0]]), np.eye(2)),), "D", "S")

    def test_slot_order(self, rng):
        """左右のスロット順が逆なら LayoutError になること"""
        with pytest.raises(LayoutError):
            FactorizedCoupling(((np.eye(2), np.eye(2)),), "S", "D")


class TestCompositeHamiltonian:
    """複合系ハミルトニアンのテスト"""

    def test_assemble_is_sum_of_parts(self, rng):
        """全ハミルトニアンが6項の和であること"""
        model = random_composite(rng)
        ch, layout = model.hamiltonian, model.layout
        total = sum(ch.part(name, layout) for name in ("S", "D", "E", "SD", "SE", "DE"))
        np.testing.assert_allclose(assemble_total(ch, layout), total)

    def test_absent_parts_are_zero(self, rng):
        """省略した項はゼロ行列になること"""
        ch = CompositeHamiltonian(
            h_s=random_hermitian(2, rng),
            h_d=random_hermitian(3, rng),
            h_sd=FactorizedCoupling.empty("D", "S"),
        )
        layout = ch.default_layout()
        assert layout.labels == ("D", "S")
        assert np.all(ch.part("SD", layout) == 0)
        assert np.all(ch.part("E", layout) == 0)

    def test_layout_mismatch(self, rng):
        """レイアウトの次元が項と合わなければ LayoutError になること"""
        model = random_composite(rng)
        with pytest.raises(LayoutError):
            assemble_total(model.hamiltonian, HilbertLayout.from_dims(2, 2, 2))

    def test_environment_dim_limit(self, rng):
        """環境の次元が大きすぎると ValidationError になること"""
        with pytest.raises(ValidationError):
            random_composite(rng, e=9)


class TestDensity:
    """密度行列のテスト"""

    def test_product_state(self, rng):
        """因子の直積密度行列を作れること"""
        layout = HilbertLayout.from_dims(3, 2)
        a, b = random_density(3, rng), random_density(2, rng)
        np.testing.assert_allclose(product_state([a, b], layout), kron(a, b))

    def test_bad_trace(self):
        """トレースが1でない行列は ValidationError になること"""
        with pytest.raises(ValidationError):
            ensure_density(np.diag([0.5, 0.4]))

    def test_negative_eigenvalue(self):
        """負の固有値を持つ行列は ValidationError になること"""
        with pytest.raises(ValidationError):
            ensure_density(np.diag([1.2, -0.2]))

    def test_factor_count(self, rng):
        """因子数とスロット数が合わなければ LayoutError になること"""
        with pytest.raises(LayoutError):
            product_state([random_density(3, rng)], HilbertLayout.from_dims(3, 2))
