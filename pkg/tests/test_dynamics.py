"""dynamics のユニットテスト"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))
from physics.dynamics import (
    LindbladSet,
    apply_dissipator,
    evolve_lindblad,
    evolve_time_dependent,
    evolve_unitary,
    liouvillian,
    uniform_grid,
)
from physics.errors import IntegrationError, ValidationError
from physics.tensor_algebra import commutator, random_density, random_hermitian

EXCITED = np.diag([0.0, 1.0]).astype(np.complex128)


class TestLindbladSet:
    """ジャンプ演算子集合のテスト"""

    def test_empty(self):
        """空の集合は散逸ゼロであること"""
        ls = LindbladSet.empty()
        assert ls.is_empty
        assert len(ls) == 0

    def test_mixed_dimensions(self):
        """次元の異なる演算子は ValidationError になること"""
        with pytest.raises(ValidationError):
            LindbladSet((np.eye(2), np.eye(3)))

    def test_dissipator_traceless(self, rng, decay_jump):
        """散逸子の出力がトレースゼロであること"""
        _, op = decay_jump
        out = apply_dissipator(random_density(2, rng), LindbladSet((op,)))
        assert abs(np.trace(out)) < 1e-14

    def test_adjoint_duality(self, rng):
        """Tr{D(ρ)X} = Tr{ρ D†(X)} であること"""
        ls = LindbladSet(tuple(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(2)))
        rho, x = random_density(3, rng), random_hermitian(3, rng)
        lhs = np.trace(ls.apply(rho) @ x)
        rhs = np.trace(rho @ ls.adjoint(x))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_liouvillian_matches_rhs(self, rng, decay_jump):
        """行優先 vec の生成子が −i[H, ρ] + D(ρ) を与えること"""
        _, op = decay_jump
        h = random_hermitian(2, rng)
        ls = LindbladSet((op,))
        rho = random_density(2, rng)
        expected = -1j * commutator(h, rho) + ls.apply(rho)
        np.testing.assert_allclose((liouvillian(h, ls) @ rho.reshape(-1)).reshape(2, 2), expected, atol=1e-14)


class TestUniformGrid:
    """時刻列のテスト"""

    def test_endpoint_included(self):
        """割り切れる t_max が端点に含まれること"""
        grid = uniform_grid(20.0, 1e-3)
        assert len(grid) == 20001
        assert grid[-1] == pytest.approx(20.0)

    def test_floor(self):
        """割り切れない t_max は切り捨てられること"""
        assert len(uniform_grid(1.05, 0.1)) == 11

    def test_invalid_step(self):
        """非正の step は ValidationError になること"""
        with pytest.raises(ValidationError):
            uniform_grid(1.0, 0.0)


class TestEvolveLindblad:
    """リンドブラッド積分のテスト"""

    def test_excited_decay(self, qubit_hamiltonian, decay_jump):
        """L = √γ|g⟩⟨e| で励起確率が e^{−2γt} で減衰すること"""
        gamma, op = decay_jump
        grid = uniform_grid(5.0, 0.1)
        traj = evolve_lindblad(EXCITED, qubit_hamiltonian, LindbladSet((op,)), grid, 0.01)
        p_e = traj.states[:, 1, 1].real
        np.testing.assert_allclose(p_e, np.exp(-2.0 * gamma * grid), atol=1e-9)

    def test_empty_set_matches_unitary(self, rng):
        """ジャンプなしでユニタリ発展と一致すること"""
        h = random_hermitian(4, rng)
        rho0 = random_density(4, rng)
        grid = uniform_grid(2.0, 0.5)
        rk4 = evolve_lindblad(rho0, h, LindbladSet.empty(), grid, 1e-3)
        exact = evolve_unitary(rho0, h, grid)
        np.testing.assert_allclose(rk4.states, exact.states, atol=1e-9)

    def test_large_dimension_path(self, rng):
        """次元 16 を超える直接評価でもユニタリ発展と一致すること"""
        h = random_hermitian(18, rng, scale=0.3)
        rho0 = random_density(18, rng)
        grid = uniform_grid(1.0, 0.25)
        rk4 = evolve_lindblad(rho0, h, LindbladSet.empty(), grid, 1e-3)
        exact = evolve_unitary(rho0, h, grid)
        np.testing.assert_allclose(rk4.final_state, exact.final_state, atol=1e-9)

    def test_step_must_divide_grid(self, qubit_hamiltonian):
        """区間を割り切らない step は ValidationError になること"""
        with pytest.raises(ValidationError):
            evolve_lindblad(EXCITED, qubit_hamiltonian, LindbladSet.empty(), [0.0, 0.25], 0.1)

    def test_dimension_mismatch(self, qubit_hamiltonian):
        """ジャンプ演算子の次元が違えば ValidationError になること"""
        with pytest.raises(ValidationError):
            evolve_lindblad(EXCITED, qubit_hamiltonian, LindbladSet((np.eye(3),)), [0.0, 1.0], 0.1)

    def test_unstable_step_aborts(self, qubit_hamiltonian):
        """安定領域を超える刻みでは IntegrationError になること"""
        op = np.sqrt(50.0) * np.array([[0, 1], [0, 0]], dtype=np.complex128)
        with pytest.raises(IntegrationError):
            evolve_lindblad(EXCITED, qubit_hamiltonian, LindbladSet((op,)), uniform_grid(2.0, 0.1), 0.1)

    def test_diagnostics(self, qubit_hamiltonian, decay_jump):
        """トレースと正値性が保たれること"""
        _, op = decay_jump
        traj = evolve_lindblad(EXCITED, qubit_hamiltonian, LindbladSet((op,)), uniform_grid(5.0, 0.1), 0.01)
        diag = traj.diagnostics()
        assert diag["max_trace_drift"] < 1e-8
        assert diag["min_eigenvalue"] >= -1e-8


class TestUnitaryTrajectory:
    """遅延評価のユニタリ軌道のテスト"""

    def test_expectations_match_states(self, rng):
        """固有基底での期待値が状態からの計算と一致すること"""
        h = random_hermitian(5, rng)
        x = random_hermitian(5, rng)
        traj = evolve_unitary(random_density(5, rng), h, np.linspace(0.0, 3.0, 7))
        direct = np.array([np.trace(traj.state(i) @ x) for i in range(len(traj))])
        np.testing.assert_allclose(traj.expectation(x), direct, atol=1e-12)

    def test_non_monotone_grid(self, rng):
        """単調増加でない時刻列は ValidationError になること"""
        with pytest.raises(ValidationError):
            evolve_unitary(random_density(2, rng), np.eye(2), [0.0, 1.0, 0.5])


class TestEvolveTimeDependent:
    """時間依存積分のテスト"""

    def test_constant_hamiltonian(self, rng):
        """一定のハミルトニアンでユニタリ発展と一致すること"""
        h = random_hermitian(3, rng)
        rho0 = random_density(3, rng)
        grid = uniform_grid(1.0, 0.5)
        traj = evolve_time_dependent(rho0, lambda t: h, grid, 1e-3)
        np.testing.assert_allclose(traj.final_state, evolve_unitary(rho0, h, grid).final_state, atol=1e-10)

    def test_rotating_drive(self):
        """共鳴回転駆動で ⟨σ_z⟩ が cos(2Ωt) で振動すること"""
        omega_r = 0.2
        sp = np.array([[0, 0], [1, 0]], dtype=np.complex128)

        def h_of_t(t):
            drive = omega_r * np.exp(-1j * t) * sp
            return np.diag([-0.5, 0.5]) + drive + drive.conj().T

        ground = np.diag([1.0, 0.0]).astype(np.complex128)
        grid = uniform_grid(10.0, 0.5)
        traj = evolve_time_dependent(ground, h_of_t, grid, 1e-3)
        p_e = traj.states[:, 1, 1].real
        np.testing.assert_allclose(p_e, np.sin(omega_r * grid) ** 2, atol=1e-8)

    def test_with_dissipation(self, qubit_hamiltonian, decay_jump):
        """リンドブラッド集合を併用できること"""
        gamma, op = decay_jump
        grid = uniform_grid(2.0, 0.5)
        traj = evolve_time_dependent(EXCITED, lambda t: qubit_hamiltonian, grid, 0.01, LindbladSet((op,)))
        np.testing.assert_allclose(traj.states[:, 1, 1].real, np.exp(-2.0 * gamma * grid), atol=1e-9)

    def test_bad_hamiltonian_dimension(self):
        """次元の合わないハミルトニアンは ValidationError になること"""
        with pytest.raises(ValidationError):
            evolve_time_dependent(EXCITED, lambda t: np.eye(3), [0.0, 0.1], 0.1)
