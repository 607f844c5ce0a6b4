"""classical_limit のユニットテスト"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))
from experiments.classical_compare import classical_work_series
from experiments.jaynes_cummings import (
    JCParams,
    build_jc,
    closed_form_work,
    coherent_state,
    default_truncation,
    jc_classical_hamiltonian,
    jc_drive_spec,
    jc_layout,
)
from physics.classical_limit import (
    ClassicalDriveSpec,
    build_classical_hamiltonian,
    classical_hamiltonian_provider,
    classical_power,
    classical_power_terms,
    drive_expectation_rates,
    drive_expectations,
)
from physics.composite_model import FactorizedCoupling, HilbertLayout
from physics.dynamics import LindbladSet, uniform_grid
from physics.energetics import injected_power
from physics.errors import LayoutError, ValidationError
from physics.tensor_algebra import kron, random_density, random_hermitian


@pytest.fixture
def jc_small():
    """g = 0.5、n_trunc = 6 の JC 模型"""
    return JCParams(g=0.5, n_trunc=6)


class TestClassicalDriveSpec:
    """古典駆動設定のテスト"""

    def test_drive_state_is_free_evolution(self, jc_small, rng):
        """ρ_D(t) が e^{−iH_D t}ρ_D(0)e^{iH_D t} であること"""
        rho_d = random_density(6, rng)
        ch = build_jc(jc_small)
        spec = ClassicalDriveSpec(ch.h_d, rho_d, ch.h_sd)
        t = 0.7
        phases = np.exp(-1j * np.arange(6) * t)
        expected = phases[:, None] * rho_d * np.conj(phases)[None, :]
        np.testing.assert_allclose(spec.drive_state(t), expected, atol=1e-13)

    def test_wrong_slots(self, jc_small):
        """D–S 以外の結合は LayoutError になること"""
        ch = build_jc(jc_small)
        coupling = FactorizedCoupling(((np.eye(2), np.eye(2)),), "S", "E")
        with pytest.raises(LayoutError):
            ClassicalDriveSpec(ch.h_d, np.eye(6) / 6, coupling)

    def test_state_dimension_mismatch(self, jc_small):
        """駆動状態と H_D の次元が違えば ValidationError になること"""
        ch = build_jc(jc_small)
        with pytest.raises(ValidationError):
            ClassicalDriveSpec(ch.h_d, np.eye(4) / 4, ch.h_sd)

    def test_expectations_are_real(self):
        """⟨B_α⟩_D と ∂_t⟨B_α⟩_D が実数として返ること"""
        params = JCParams(g=0.5, n_trunc=20)
        spec = jc_drive_spec(params, coherent_state(0.8, 20))
        assert drive_expectations(spec, 0.3).dtype == np.float64
        assert drive_expectation_rates(spec, 0.3).dtype == np.float64


class TestClassicalHamiltonian:
    """有効ハミルトニアンのテスト"""

    @pytest.mark.parametrize("t", [0.0, 0.4, 2.5, 7.0])
    def test_matches_rotating_form(self, t):
        """期待値から作った H_CL が (ω/2)σ_z + e^{−iωt}Sσ₊ + h.c. と一致すること"""
        params = JCParams(g=0.5, n_trunc=default_truncation(4.0))
        state = coherent_state(2.0 * np.exp(0.3j), params.n_trunc)
        spec = jc_drive_spec(params, state)
        h = build_classical_hamiltonian(build_jc(params).h_s, spec, t)
        np.testing.assert_allclose(h, jc_classical_hamiltonian(state, params, t), atol=1e-12)

    def test_provider_is_hermitian(self):
        """時刻関数が各時刻でエルミート行列を返すこと"""
        params = JCParams(g=0.5, n_trunc=20)
        spec = jc_drive_spec(params, coherent_state(0.5, 20))
        provider = classical_hamiltonian_provider(build_jc(params).h_s, spec)
        h = provider(1.3)
        np.testing.assert_allclose(h, h.conj().T, atol=1e-14)

    def test_drive_environment_coupling(self, jc_small, rng):
        """駆動系–環境結合があれば S⊗E 上の行列を返すこと"""
        ch = build_jc(jc_small)
        de = FactorizedCoupling(((random_hermitian(6, rng), random_hermitian(2, rng)),), "D", "E")
        spec = ClassicalDriveSpec(ch.h_d, random_density(6, rng), ch.h_sd, de)
        se = HilbertLayout(("S", "E"), (2, 2))
        h = build_classical_hamiltonian(ch.h_s, spec, 0.5, se)
        assert h.shape == (4, 4)
        with pytest.raises(LayoutError):
            build_classical_hamiltonian(ch.h_s, spec, 0.5)


class TestClassicalPower:
    """古典的な注入仕事率のテスト"""

    @pytest.mark.parametrize("seed", range(20))
    def test_equals_injected_power_on_factorized_state(self, seed):
        """因子化した状態では注入仕事率と一致すること"""
        rng = np.random.default_rng(seed)
        params = JCParams(g=0.5, n_trunc=6)
        ch = build_jc(params)
        layout = jc_layout(params)
        rho_d0 = random_density(6, rng)
        rho_s = random_density(2, rng)
        t = float(rng.uniform(0.0, 10.0))

        spec = ClassicalDriveSpec(ch.h_d, rho_d0, ch.h_sd)
        rho = kron(spec.drive_state(t), rho_s)
        p_q = injected_power(rho, ch.part("SD", layout), ch.part("D", layout))
        assert classical_power(rho_s, spec, ch.h_s, t) == pytest.approx(p_q, abs=1e-10)

    def test_terms_sum(self, jc_small, rng):
        """内部エネルギー変化率と熱交換率の和が仕事率になること"""
        ch = build_jc(jc_small)
        spec = ClassicalDriveSpec(ch.h_d, random_density(6, rng), ch.h_sd)
        rho_s = random_density(2, rng)
        op = np.sqrt(0.2) * np.array([[0, 1], [0, 0]], dtype=np.complex128)
        diss = LindbladSet((op,)).apply(rho_s)
        internal, exchange = classical_power_terms(rho_s, spec, ch.h_s, 1.1, diss)
        assert internal + exchange == pytest.approx(classical_power(rho_s, spec, ch.h_s, 1.1))
        assert exchange != 0.0

    def test_classical_work_closed_form(self):
        """積分した古典仕事が −ħω sin²(g|α|t) と一致すること"""
        params = JCParams(g=0.5, n_trunc=default_truncation(1.0))
        state = coherent_state(1.0, params.n_trunc)
        grid = uniform_grid(10.0, 1e-3)
        w_cl = classical_work_series(params, state, grid, 1e-3)
        expected = closed_form_work("CL_COH", params, 1.0, grid)
        np.testing.assert_allclose(w_cl, expected, atol=1e-6)
