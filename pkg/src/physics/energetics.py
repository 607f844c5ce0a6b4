"""エネルギー収支

駆動系から系へ注入される仕事率、3体の厳密な熱流、散逸子形式の熱流、
連続の式による整合性チェックと、軌道に沿った累積収支（EnergyLedger）を扱う。

符号の規約:
    W_Q < 0 は系から駆動系へエネルギーが流れることを表す。
    Q_S, Q_D > 0 は環境へ散逸した熱を表す。
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid

from .composite_model import CompositeHamiltonian, HilbertLayout, assemble_total, lift
from .dynamics import LindbladSet, Trajectory
from .errors import LayoutError, ValidationError
from .tensor_algebra import (
    as_matrix,
    commutator,
    dagger,
    ensure_same_dim,
    expectation,
    partial_trace,
)

logger = logging.getLogger(__name__)

# 仕事率の虚部の許容値
IMAG_TOL = 1e-10

# 台帳のCSV列（順序固定）
LEDGER_COLUMNS = ["t", "W_Q", "Q_S", "Q_D", "Q_tot", "dH_D", "residual"]

# 3体モードで末尾に加える列
CROSSCHECK_COLUMN = "Q_tot_mismatch"

# Q_tot の2経路の差の許容値
CROSSCHECK_TOL = 1e-6


def _hermitian_part(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dagger(x))


def _real(value: complex, what: str) -> float:
    """解析的に実数のトレースから実部を取り出す"""
    scale = max(1.0, abs(value.real))
    if abs(value.imag) > IMAG_TOL * scale:
        raise ValidationError(f"{what} の虚部が大きすぎます ({value.imag:.3e})。入力がエルミートか確認してください")
    return float(value.real)


def _real_series(values: np.ndarray, what: str) -> np.ndarray:
    scale = np.maximum(1.0, np.abs(values.real))
    worst = float(np.max(np.abs(values.imag) / scale, initial=0.0))
    if worst > IMAG_TOL:
        raise ValidationError(f"{what} の虚部が大きすぎます (相対 {worst:.3e})")
    return values.real.copy()


# ============================================================
# 仕事率・熱流を与える演算子
# ============================================================

def injected_power_operator(h_sd, h_d_lifted) -> np.ndarray:
    """注入仕事率の演算子 −i[H_SD, H_D ⊗ I_S]"""
    return _hermitian_part(-1j * commutator(h_sd, h_d_lifted))


def extracted_drive_power_operator(
    ch: CompositeHamiltonian, layout: HilbertLayout, ls: Optional[LindbladSet] = None
) -> np.ndarray:
    """−d⟨H_D⟩/dt を与える演算子 i[H_D, H] − D†(H_D)"""
    h_d = ch.part("D", layout)
    op = 1j * commutator(h_d, assemble_total(ch, layout))
    if ls is not None and not ls.is_empty:
        if layout.has_environment:
            raise LayoutError("環境を明示したレイアウトではリンドブラッド項を併用できません")
        op = op - ls.adjoint(h_d)
    return _hermitian_part(op)


def exact_heat_operators(ch: CompositeHamiltonian, layout: HilbertLayout) -> tuple[np.ndarray, np.ndarray]:
    """3体モードの熱流演算子 (X_S, X_D)

    dQ_S/dt = Tr{ρ X_S}, dQ_D/dt = Tr{ρ X_D}。
    """
    _require_environment(layout)
    h_s, h_d, h_sd = ch.part("S", layout), ch.part("D", layout), ch.part("SD", layout)
    h_se, h_de = ch.part("SE", layout), ch.part("DE", layout)
    x_s = -1j * commutator(h_se, h_s) - 1j * commutator(h_se + h_de, h_sd)
    x_d = -1j * commutator(h_de, h_d)
    return _hermitian_part(x_s), _hermitian_part(x_d)


def total_heat_operator(ch: CompositeHamiltonian, layout: HilbertLayout) -> np.ndarray:
    """単一トレース形の全熱流演算子 −i[H_SE + H_DE, H_S + H_SD + H_D]"""
    _require_environment(layout)
    bath = ch.part("SE", layout) + ch.part("DE", layout)
    rest = ch.part("S", layout) + ch.part("SD", layout) + ch.part("D", layout)
    return _hermitian_part(-1j * commutator(bath, rest))


def reduced_heat_operators(
    ls: LindbladSet, h_s_lifted, h_sd, h_d_lifted
) -> tuple[np.ndarray, np.ndarray]:
    """散逸子形式の熱流演算子 (−D†(H_S + H_SD), −D†(H_D))"""
    h_s_lifted, h_sd, h_d_lifted = (as_matrix(m) for m in (h_s_lifted, h_sd, h_d_lifted))
    ls.check_dim(h_s_lifted.shape[0])
    return (
        _hermitian_part(-ls.adjoint(h_s_lifted + h_sd)),
        _hermitian_part(-ls.adjoint(h_d_lifted)),
    )


def _require_environment(layout: HilbertLayout) -> None:
    if not layout.has_environment:
        raise LayoutError("この計算には環境スロット E を含むレイアウトが必要です")


# ============================================================
# 瞬時の仕事率・熱流
# ============================================================

def injected_power(rho_sd, h_sd, h_d_lifted) -> float:
    """注入仕事率 −i Tr{ρ [H_SD, H_D ⊗ I_S]}

    Args:
        rho_sd: 密度行列
        h_sd: 系–駆動系結合（全空間）
        h_d_lifted: 全空間へリフトした H_D

    Returns:
        仕事率（ħω² 単位）
    """
    rho = as_matrix(rho_sd, "rho")
    op = injected_power_operator(h_sd, h_d_lifted)
    ensure_same_dim(rho, op, "injected_power")
    return _real(expectation(rho, op), "注入仕事率")


def exact_heat_powers(rho, ch: CompositeHamiltonian, layout: HilbertLayout) -> tuple[float, float]:
    """3体モードの熱流 (dQ_S/dt, dQ_D/dt)

    系の熱流の第1項は ρ_SE = Tr_D{ρ} 上で評価する。

    Raises:
        LayoutError: レイアウトに E がない
    """
    _require_environment(layout)
    rho = as_matrix(rho, "rho")
    ch.check_layout(layout)
    if rho.shape[0] != layout.total_dim:
        raise LayoutError(f"rho の次元 {rho.shape[0]} がレイアウトの次元 {layout.total_dim} と一致しません")

    se_layout = layout.without("D")
    rho_se = partial_trace(rho, layout, {"S", "E"})
    h_se_local = ch.h_se.assemble(se_layout) if ch.h_se is not None else np.zeros_like(rho_se)
    direct = -1j * expectation(rho_se, commutator(h_se_local, lift(ch.h_s, se_layout, "S")))

    h_sd = ch.part("SD", layout)
    bath = ch.part("SE", layout) + ch.part("DE", layout)
    via_coupling = -1j * expectation(rho, commutator(bath, h_sd))
    drive = -1j * expectation(rho, commutator(ch.part("DE", layout), ch.part("D", layout)))

    return _real(direct + via_coupling, "dQ_S/dt"), _real(drive, "dQ_D/dt")


def total_heat_power_single_trace(rho, ch: CompositeHamiltonian, layout: HilbertLayout) -> float:
    """dQ_tot/dt = −i Tr{ρ [H_SE + H_DE, H_S + H_SD + H_D]}"""
    rho = as_matrix(rho, "rho")
    op = total_heat_operator(ch, layout)
    ensure_same_dim(rho, op, "total_heat_power")
    return _real(expectation(rho, op), "dQ_tot/dt")


def reduced_heat_powers(diss, h_s_lifted, h_sd, h_d_lifted) -> tuple[float, float]:
    """散逸子形式の熱流 (−Tr{D·(H_S + H_SD)}, −Tr{D·H_D})

    Args:
        diss: apply_dissipator の出力 D(ρ)
        h_s_lifted: 全空間へリフトした H_S
        h_sd: 系–駆動系結合（全空間）
        h_d_lifted: 全空間へリフトした H_D
    """
    diss = as_matrix(diss, "diss")
    h_s_lifted, h_sd, h_d_lifted = (as_matrix(m) for m in (h_s_lifted, h_sd, h_d_lifted))
    for m in (h_s_lifted, h_sd, h_d_lifted):
        ensure_same_dim(diss, m, "reduced_heat_powers")
    dq_s = -expectation(diss, h_s_lifted + h_sd)
    dq_d = -expectation(diss, h_d_lifted)
    return _real(dq_s, "dQ_S/dt"), _real(dq_d, "dQ_D/dt")


def extracted_drive_power(
    rho, ch: CompositeHamiltonian, layout: HilbertLayout, ls: Optional[LindbladSet] = None
) -> float:
    """駆動系から取り出されるエネルギー流 −d⟨H_D⟩/dt（エーレンフェストの定理）

    2体モードでリンドブラッド集合を与えると −Tr{D(ρ)H_D} を加える。
    """
    rho = as_matrix(rho, "rho")
    op = extracted_drive_power_operator(ch, layout, ls)
    ensure_same_dim(rho, op, "extracted_drive_power")
    return _real(expectation(rho, op), "−d⟨H_D⟩/dt")


def inclusive_energy_rate(
    rho, ch: CompositeHamiltonian, layout: HilbertLayout, ls: Optional[LindbladSet] = None
) -> float:
    """d⟨I_D⊗H_S + H_SD⟩/dt（第1法則により 注入仕事率 − dQ_S/dt に等しい）"""
    rho = as_matrix(rho, "rho")
    inner = ch.part("S", layout) + ch.part("SD", layout)
    op = 1j * commutator(assemble_total(ch, layout), inner)
    if ls is not None and not ls.is_empty:
        op = op + ls.adjoint(inner)
    ensure_same_dim(rho, op, "inclusive_energy_rate")
    return _real(expectation(rho, _hermitian_part(op)), "d⟨H_S+H_SD⟩/dt")


# ============================================================
# 累積収支
# ============================================================

@dataclass
class EnergyLedger:
    """1回の計算の累積エネルギー収支（ħω 単位）

    Attributes:
        times: 時刻列
        w_q: 注入仕事 W_Q
        q_s: 系から直接散逸した熱 Q_S
        q_d: 駆動系から散逸した熱 Q_D
        q_tot: Q_S + Q_D
        h_d_expect: ⟨H_D⟩ の時系列
        conservation_residual: |−Δ⟨H_D⟩ − (W_Q + Q_D)|
        q_tot_crosscheck: 単一トレース形から積分した Q_tot（3体モードのみ）
        powers: 各時刻の仕事率・熱流 (dW_Q/dt, dQ_S/dt, dQ_D/dt) を行に持つ配列
    """

    times: np.ndarray
    w_q: np.ndarray
    q_s: np.ndarray
    q_d: np.ndarray
    q_tot: np.ndarray
    h_d_expect: np.ndarray
    conservation_residual: np.ndarray
    q_tot_crosscheck: Optional[np.ndarray] = None
    powers: Optional[np.ndarray] = None

    @property
    def delta_h_d(self) -> np.ndarray:
        """Δ⟨H_D⟩(t) = ⟨H_D⟩(t) − ⟨H_D⟩(0)"""
        return self.h_d_expect - self.h_d_expect[0]

    @property
    def max_residual(self) -> float:
        return float(np.max(self.conservation_residual, initial=0.0))

    @property
    def q_tot_mismatch(self) -> Optional[np.ndarray]:
        """|Q_tot − 単一トレース形の Q_tot|（2体モードでは None）"""
        if self.q_tot_crosscheck is None:
            return None
        return np.abs(self.q_tot_crosscheck - self.q_tot)

    @property
    def max_q_tot_mismatch(self) -> Optional[float]:
        mismatch = self.q_tot_mismatch
        return None if mismatch is None else float(np.max(mismatch, initial=0.0))

    def crosscheck_passed(self, tol: float = CROSSCHECK_TOL) -> Optional[bool]:
        """Q_tot の2経路が tol 以内で一致するか（2体モードでは None）"""
        worst = self.max_q_tot_mismatch
        return None if worst is None else worst <= tol

    def stationary_time(self, tol: float) -> Optional[float]:
        """それ以降すべての仕事率・熱流が tol 未満になる最初の時刻（なければ None）"""
        if self.powers is None:
            raise ValidationError("仕事率の時系列が記録されていません")
        active = np.any(np.abs(self.powers) >= tol, axis=0)
        if not active.any():
            return float(self.times[0])
        last = int(np.flatnonzero(active)[-1])
        if last == len(self.times) - 1:
            return None
        return float(self.times[last + 1])

    def final(self) -> dict[str, float]:
        """最終時刻の値"""
        return {
            "t": float(self.times[-1]),
            "W_Q": float(self.w_q[-1]),
            "Q_S": float(self.q_s[-1]),
            "Q_D": float(self.q_d[-1]),
            "Q_tot": float(self.q_tot[-1]),
            "dH_D": float(self.delta_h_d[-1]),
        }

    def to_frame(self, stride: int = 1) -> pd.DataFrame:
        """CSV出力用の DataFrame（列順固定、3体モードでは末尾に Q_tot_mismatch）

        Args:
            stride: 行の間引き間隔
        """
        df = pd.DataFrame({
            "t": self.times,
            "W_Q": self.w_q,
            "Q_S": self.q_s,
            "Q_D": self.q_d,
            "Q_tot": self.q_tot,
            "dH_D": self.delta_h_d,
            "residual": self.conservation_residual,
        }, columns=LEDGER_COLUMNS)
        if self.q_tot_crosscheck is not None:
            df[CROSSCHECK_COLUMN] = self.q_tot_mismatch
        return df.iloc[::stride].reset_index(drop=True)


def _cumulative(times: np.ndarray, power: np.ndarray) -> np.ndarray:
    if len(times) < 2:
        return np.zeros_like(power)
    return cumulative_trapezoid(power, times, initial=0.0)


def accumulate_ledger(
    traj: Trajectory,
    ch: CompositeHamiltonian,
    ls: Optional[LindbladSet],
    layout: HilbertLayout,
) -> EnergyLedger:
    """軌道の全時刻で仕事率・熱流を評価し、台形則で累積する

    レイアウトに E があれば3体の厳密な熱流、なければ ls による散逸子形式を使う。

    Args:
        traj: 時間発展の軌道
        ch: 複合系ハミルトニアン
        ls: 2体モードのジャンプ演算子の集合（None は閉じた系）
        layout: 軌道の空間のレイアウト

    Returns:
        累積収支

    Raises:
        ValidationError: 軌道とモデルの次元が一致しない、または3体モードに ls を渡した
    """
    ch.check_layout(layout)
    if traj.dim != layout.total_dim:
        raise ValidationError(f"軌道の次元 {traj.dim} がモデルの次元 {layout.total_dim} と一致しません")
    explicit_env = layout.has_environment
    if explicit_env and ls is not None and not ls.is_empty:
        raise ValidationError("環境を明示したモデルにはリンドブラッド集合を渡せません")
    if ls is None:
        ls = LindbladSet.empty()

    h_d = ch.part("D", layout)
    h_sd = ch.part("SD", layout)
    ops = [injected_power_operator(h_sd, h_d), h_d]
    if explicit_env:
        ops.extend(exact_heat_operators(ch, layout))
        ops.append(total_heat_operator(ch, layout))
    else:
        ops.extend(reduced_heat_operators(ls, ch.part("S", layout), h_sd, h_d))

    values = traj.expectations(ops)
    p_inj = _real_series(values[0], "注入仕事率")
    h_d_expect = _real_series(values[1], "⟨H_D⟩")
    dq_s = _real_series(values[2], "dQ_S/dt")
    dq_d = _real_series(values[3], "dQ_D/dt")

    times = traj.times
    w_q = _cumulative(times, p_inj)
    q_s = _cumulative(times, dq_s)
    q_d = _cumulative(times, dq_d)
    q_tot = q_s + q_d
    residual = np.abs(-(h_d_expect - h_d_expect[0]) - (w_q + q_d))

    crosscheck = None
    if explicit_env:
        crosscheck = _cumulative(times, _real_series(values[4], "dQ_tot/dt"))
        worst = float(np.max(np.abs(crosscheck - q_tot), initial=0.0))
        if worst > CROSSCHECK_TOL:
            logger.warning("Q_tot の2経路が一致しません (最大差 %.3e)", worst)
        else:
            logger.debug("Q_tot 単一トレース形との差: %.3e", worst)

    ledger = EnergyLedger(
        times=times,
        w_q=w_q,
        q_s=q_s,
        q_d=q_d,
        q_tot=q_tot,
        h_d_expect=h_d_expect,
        conservation_residual=residual,
        q_tot_crosscheck=crosscheck,
        powers=np.vstack([p_inj, dq_s, dq_d]),
    )
    logger.debug("台帳: %d 点, 保存則残差の最大 %.3e", len(times), ledger.max_residual)
    return ledger
