"""classical_compare のユニットテスト"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))
from experiments.classical_compare import (
    COMPARISON_COLUMNS,
    QuantumClassicalComparison,
    classical_deviation_sweep,
    compare_quantum_classical,
)
from experiments.jaynes_cummings import GROUND, JCParams
from physics.dynamics import uniform_grid
from physics.errors import ValidationError


class TestCompareQuantumClassical:
    """W_Q と W_CL の比較のテスト"""

    def test_vacuum_drive(self):
        """α = 0 では W_CL = 0、W_Q は真空ラビ振動になること"""
        params = JCParams(g=0.5, n_trunc=2)
        grid = uniform_grid(10.0, 1e-3)
        result = compare_quantum_classical(params, 0.0, grid)
        np.testing.assert_allclose(result.w_cl, 0.0, atol=1e-12)
        np.testing.assert_allclose(result.w_q, -np.sin(0.5 * grid) ** 2, atol=1e-6)
        assert result.t_q == 0.0

    def test_ground_state_no_work(self):
        """α = 0 かつ |g⟩ から始めれば両方ゼロであること"""
        params = JCParams(g=0.5, n_trunc=2)
        result = compare_quantum_classical(params, 0.0, uniform_grid(5.0, 1e-2), tls=GROUND)
        assert result.max_deviation() == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(result.w_q, 0.0, atol=1e-12)

    def test_characteristic_time(self):
        """t_q = |α|/g であること"""
        params = JCParams(g=0.5, n_trunc=30)
        result = compare_quantum_classical(params, 2.0, uniform_grid(1.0, 1e-2))
        assert result.t_q == pytest.approx(4.0)

    def test_short_time_agreement(self):
        """ラビ振動の最初の山までは W_Q と W_CL が近いこと"""
        params = JCParams(g=0.5, n_trunc=85)
        result = compare_quantum_classical(params, 5.0, uniform_grid(np.pi / 2.5, 1e-3))
        assert result.max_deviation() < 0.1

    def test_grid_needs_two_points(self):
        """1点の時刻列で刻みを推定できなければ ValidationError になること"""
        with pytest.raises(ValidationError):
            compare_quantum_classical(JCParams(g=0.5, n_trunc=2), 0.0, [0.0])


class TestComparisonResult:
    """比較結果のテスト"""

    def test_windowed_max(self):
        """t_end までの最大偏差だけを返すこと"""
        times = np.array([0.0, 1.0, 2.0])
        result = QuantumClassicalComparison(times, np.array([0.0, -0.1, -0.9]), np.zeros(3), t_q=1.0)
        assert result.max_deviation(1.0) == pytest.approx(0.1)
        assert result.max_deviation() == pytest.approx(0.9)

    def test_frame(self):
        """CSV 用の列順と間引きが正しいこと"""
        times = np.linspace(0.0, 1.0, 5)
        result = QuantumClassicalComparison(times, -times, np.zeros(5), t_q=1.0)
        df = result.to_frame(stride=2)
        assert list(df.columns) == COMPARISON_COLUMNS
        assert len(df) == 3
        assert df["deviation"].iloc[-1] == pytest.approx(1.0)


class TestDeviationSweep:
    """n̄ 掃引のテスト"""

    def test_rabi_cycle_window_converges(self):
        """最初のラビ周期での偏差が n̄ とともに単調に減ること"""
        df = classical_deviation_sweep([25, 100, 400], g=0.5, step=1e-2)
        deviations = df["max_deviation"].to_numpy()
        assert list(df["nbar"]) == [25, 100, 400]
        assert np.all(np.diff(deviations) < 0)
        assert deviations[-1] < 0.01

    def test_half_tq_window_saturates(self):
        """[0, t_q/2] では崩壊のため偏差が 1/2 付近に留まること"""
        df = classical_deviation_sweep([25, 100], g=0.5, step=1e-2, window="half_tq")
        assert np.all(df["max_deviation"] > 0.4)
        assert np.all(df["max_deviation"] <= 0.5 + 1e-3)

    def test_unknown_window(self):
        """未知の窓指定は ValidationError になること"""
        with pytest.raises(ValidationError):
            classical_deviation_sweep([25], g=0.5, step=1e-2, window="full")
