"""量子駆動と古典駆動の比較

コヒーレント状態の駆動系について、複合系の注入仕事 W_Q と
古典駆動の注入仕事 W_CL を同じ時刻列で求めて比べる。
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid

from physics.classical_limit import classical_hamiltonian_provider, classical_power_series
from physics.composite_model import assemble_total
from physics.dynamics import evolve_time_dependent, evolve_unitary
from physics.energetics import accumulate_ledger
from physics.errors import ValidationError
from .jaynes_cummings import (
    EXCITED,
    DriveState,
    JCParams,
    build_jc,
    coherent_state,
    default_truncation,
    initial_state,
    jc_drive_spec,
    jc_layout,
)

logger = logging.getLogger(__name__)

COMPARISON_COLUMNS = ["t", "W_Q", "W_CL", "deviation"]


@dataclass
class QuantumClassicalComparison:
    """W_Q(t) と W_CL(t) の組

    Attributes:
        times: 時刻列
        w_q: 複合系の注入仕事
        w_cl: 古典駆動の注入仕事
        t_q: 特性時間 |α|/g
    """

    times: np.ndarray
    w_q: np.ndarray
    w_cl: np.ndarray
    t_q: float

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.w_q - self.w_cl)

    def max_deviation(self, t_end: Optional[float] = None) -> float:
        """[0, t_end] での max|W_Q − W_CL|"""
        mask = np.ones_like(self.times, dtype=bool) if t_end is None else self.times <= t_end + 1e-12
        return float(np.max(self.deviation[mask], initial=0.0))

    def to_frame(self, stride: int = 1) -> pd.DataFrame:
        df = pd.DataFrame({
            "t": self.times,
            "W_Q": self.w_q,
            "W_CL": self.w_cl,
            "deviation": self.deviation,
        }, columns=COMPARISON_COLUMNS)
        return df.iloc[::stride].reset_index(drop=True)


def _grid_step(grid: np.ndarray) -> float:
    if len(grid) < 2:
        raise ValidationError("時刻列は2点以上必要です")
    return float(grid[1] - grid[0])


def classical_work_series(params: JCParams, state: DriveState, grid, step: float,
                          tls: Optional[np.ndarray] = None) -> np.ndarray:
    """古典駆動の下で RK4 発展させた系の累積注入仕事 W_CL(t)"""
    spec = jc_drive_spec(params, state)
    h_s = build_jc(params).h_s
    rho_s = EXCITED if tls is None else tls
    traj = evolve_time_dependent(rho_s, classical_hamiltonian_provider(h_s, spec), grid, step)
    power = classical_power_series(traj, spec)
    return cumulative_trapezoid(power, traj.times, initial=0.0)


def compare_quantum_classical(params: JCParams, alpha: complex, grid,
                              step: Optional[float] = None,
                              tls: Optional[np.ndarray] = None) -> QuantumClassicalComparison:
    """コヒーレント駆動の W_Q(t) と W_CL(t) を求める

    Args:
        params: 模型のパラメータ
        alpha: コヒーレント振幅
        grid: 0 から始まる等間隔の時刻列
        step: 古典側の RK4 刻み（省略時は時刻列の間隔）
        tls: 二準位系の初期状態（既定は |e⟩）

    Returns:
        比較結果と特性時間 t_q = |α|/g
    """
    grid = np.asarray(grid, dtype=float)
    step = _grid_step(grid) if step is None else step
    state = coherent_state(alpha, params.n_trunc)

    ch = build_jc(params)
    layout = jc_layout(params)
    traj = evolve_unitary(initial_state(state, tls), assemble_total(ch, layout), grid)
    w_q = accumulate_ledger(traj, ch, None, layout).w_q
    w_cl = classical_work_series(params, state, grid, step, tls)

    t_q = abs(complex(alpha)) / params.g if params.g > 0 else math.inf
    logger.debug("量子/古典比較 |α|=%g: 最大偏差 %.3e", abs(alpha), float(np.max(np.abs(w_q - w_cl))))
    return QuantumClassicalComparison(times=grid, w_q=w_q, w_cl=w_cl, t_q=t_q)


def classical_deviation_sweep(nbar_list: Sequence[float], g: float, step: float,
                              window: str = "rabi_cycle") -> pd.DataFrame:
    """n̄ ごとの max|W_Q − W_CL|

    Args:
        nbar_list: 平均光子数の列
        g: 結合強度
        step: 時刻刻み
        window: "rabi_cycle"（[0, π/(g|α|)]）または "half_tq"（[0, t_q/2]）

    Returns:
        列 nbar, t_end, max_deviation の DataFrame（入力順）
    """
    rows = []
    for nbar in nbar_list:
        alpha = math.sqrt(nbar)
        if window == "rabi_cycle":
            t_end = math.pi / (g * alpha)
        elif window == "half_tq":
            t_end = 0.5 * alpha / g
        else:
            raise ValidationError(f"未知の窓: {window}")
        n = int(math.ceil(t_end / step))
        grid = step * np.arange(n + 1)
        params = JCParams(g=g, n_trunc=default_truncation(nbar))
        result = compare_quantum_classical(params, alpha, grid, step)
        rows.append({"nbar": nbar, "t_end": t_end, "max_deviation": result.max_deviation(t_end)})
        logger.info("n̄=%g: max|W_Q − W_CL| = %.4e (t ≤ %.3f)", nbar, rows[-1]["max_deviation"], t_end)
    return pd.DataFrame(rows, columns=["nbar", "t_end", "max_deviation"])
