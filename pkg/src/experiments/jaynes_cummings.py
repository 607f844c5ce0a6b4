"""ジェインズ–カミングス模型

打ち切ったフォック空間上の共鳴 JC 模型、コヒーレント状態、
仕事の閉形式、黄金律によるリンドブラッド集合、散逸のある実験を扱う。

基底の規約:
    駆動系 D はフォック状態 |0⟩, ..., |n_trunc − 1⟩
    二準位系 S は添字 0 = |g⟩, 1 = |e⟩
    全空間は D ⊗ S
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from physics.classical_limit import ClassicalDriveSpec
from physics.composite_model import (
    CompositeHamiltonian,
    FactorizedCoupling,
    HilbertLayout,
    assemble_total,
    product_state,
    pure_density,
)
from physics.dynamics import (
    LindbladSet,
    evolve_lindblad,
    evolve_unitary,
    uniform_grid,
)
from physics.energetics import EnergyLedger, accumulate_ledger
from physics.errors import ConvergenceError, ValidationError
from physics.tensor_algebra import dagger, hermitian_eig, kron, unitary_exp

logger = logging.getLogger(__name__)

# 打ち切りで許す規格化の欠損
NORM_DEFICIT_TOL = 1e-10

# 黄金律レートの切り捨て閾値
RATE_THRESHOLD = 1e-14

# 固有エネルギーを同じ準位とみなす幅
ENERGY_GAP_TOL = 1e-10

# 定常判定の閾値（全仕事率・熱流）
STATIONARY_POWER_TOL = 1e-6

# 二準位系の演算子（|g⟩ = 0, |e⟩ = 1）
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
SIGMA_Y = -1j * SIGMA_PLUS + 1j * SIGMA_MINUS
SIGMA_Z = np.diag([-1.0, 1.0]).astype(np.complex128)
GROUND = np.diag([1.0, 0.0]).astype(np.complex128)
EXCITED = np.diag([0.0, 1.0]).astype(np.complex128)


@dataclass(frozen=True)
class JCParams:
    """JC 模型のパラメータ

    Attributes:
        g: 結合強度（ω 単位）。0 は非結合の極限
        n_trunc: フォック空間の打ち切り次元
        omega: 共鳴角振動数（単位系では 1）
    """

    g: float
    n_trunc: int
    omega: float = 1.0

    def __post_init__(self):
        if self.g < 0:
            raise ValidationError(f"g は非負である必要があります: {self.g}")
        if int(self.n_trunc) != self.n_trunc or self.n_trunc < 2:
            raise ValidationError(f"n_trunc は2以上の整数である必要があります: {self.n_trunc}")
        if self.omega <= 0:
            raise ValidationError(f"omega は正である必要があります: {self.omega}")
        object.__setattr__(self, "n_trunc", int(self.n_trunc))

    def rabi_frequency(self, n):
        """Ω_n = g√(n+1)"""
        return self.g * np.sqrt(np.asarray(n, dtype=float) + 1.0)


@dataclass(frozen=True)
class DriveState:
    """駆動系の純粋状態 Σ a_n |n⟩（打ち切り後も再規格化しない）"""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).ravel()
        if amps.size < 2:
            raise ValidationError("振幅は2成分以上必要です")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_trunc(self) -> int:
        return int(self.amplitudes.size)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm_deficit(self) -> float:
        """1 − Σ|a_n|²"""
        return float(1.0 - self.populations.sum())

    @property
    def mean_photon_number(self) -> float:
        return float(np.dot(np.arange(self.n_trunc), self.populations))

    def ladder_expectation(self) -> complex:
        """⟨b⟩ = Σ a_n* a_{n+1} √(n+1)"""
        a = self.amplitudes
        n = np.arange(self.n_trunc - 1)
        return complex(np.sum(np.conj(a[:-1]) * a[1:] * np.sqrt(n + 1.0)))

    def density(self) -> np.ndarray:
        """|ψ⟩⟨ψ|"""
        return pure_density(self.amplitudes)


# ============================================================
# 演算子と模型
# ============================================================

def annihilation(n_trunc: int) -> np.ndarray:
    """打ち切った消滅演算子 b"""
    return np.diag(np.sqrt(np.arange(1, n_trunc, dtype=float)), k=1).astype(np.complex128)


def number_operator(n_trunc: int) -> np.ndarray:
    return np.diag(np.arange(n_trunc, dtype=float)).astype(np.complex128)


def jc_layout(params: JCParams) -> HilbertLayout:
    return HilbertLayout.from_dims(params.n_trunc, 2)


def jc_coupling(params: JCParams) -> FactorizedCoupling:
    """g(b⊗σ₊ + b†⊗σ₋) の直交位相形 Σ B_α ⊗ A_α

    B₁ = (b + b†)/√2, A₁ = (g/√2)σ_x
    B₂ = i(b − b†)/√2, A₂ = (g/√2)σ_y
    """
    b = annihilation(params.n_trunc)
    b_dag = dagger(b)
    scale = params.g / math.sqrt(2.0)
    quad_x = (b + b_dag) / math.sqrt(2.0)
    quad_p = 1j * (b - b_dag) / math.sqrt(2.0)
    return FactorizedCoupling(
        ((quad_x, scale * SIGMA_X), (quad_p, scale * SIGMA_Y)), "D", "S"
    )


def build_jc(params: JCParams) -> CompositeHamiltonian:
    """共鳴 JC 模型 H = (ω/2)σ_z + ω b†b + g(bσ₊ + b†σ₋)"""
    return CompositeHamiltonian(
        h_s=0.5 * params.omega * SIGMA_Z,
        h_d=params.omega * number_operator(params.n_trunc),
        h_sd=jc_coupling(params),
    )


def excitation_number_operator(params: JCParams) -> np.ndarray:
    """b†b ⊗ I + I ⊗ |e⟩⟨e|"""
    n = params.n_trunc
    return kron(number_operator(n), np.eye(2)) + kron(np.eye(n), EXCITED)


# ============================================================
# 駆動系の状態
# ============================================================

def required_truncation(alpha: complex, tol: float = NORM_DEFICIT_TOL) -> int:
    """規格化の欠損が tol 以下になる最小の n_trunc"""
    nbar = abs(alpha) ** 2
    if nbar == 0.0:
        return 2
    n = np.arange(int(nbar + 20.0 * math.sqrt(nbar) + 60))
    log_p = -nbar + n * math.log(nbar) - gammaln(n + 1.0)
    cumulative = np.cumsum(np.exp(log_p))
    ok = np.flatnonzero(1.0 - cumulative <= tol)
    return max(2, int(ok[0]) + 1) if ok.size else int(n[-1]) + 1


def default_truncation(nbar: float) -> int:
    """既定の打ち切り ceil(n̄ + 10√n̄ + 10)"""
    return int(math.ceil(nbar + 10.0 * math.sqrt(nbar) + 10.0))


def coherent_state(alpha: complex, n_trunc: int) -> DriveState:
    """コヒーレント状態 |α⟩ = e^{−|α|²/2} Σ α^n/√(n!) |n⟩

    Raises:
        ValidationError: 打ち切りで失われる規格化が 1e−10 を超える
    """
    if n_trunc < 2:
        raise ValidationError(f"n_trunc は2以上である必要があります: {n_trunc}")
    alpha = complex(alpha)
    n = np.arange(n_trunc)
    if alpha == 0:
        amps = np.zeros(n_trunc, dtype=np.complex128)
        amps[0] = 1.0
        return DriveState(amps)
    r = abs(alpha)
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1.0)
    amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    state = DriveState(amps)
    if state.norm_deficit > NORM_DEFICIT_TOL:
        raise ValidationError(
            f"n_trunc={n_trunc} では |α|={r:g} のノルムが {state.norm_deficit:.3e} 欠けます。"
            f"n_trunc を {required_truncation(alpha)} 以上にしてください"
        )
    logger.debug("コヒーレント状態 α=%s, n_trunc=%d, ノルム欠損 %.3e", alpha, n_trunc, state.norm_deficit)
    return state


def fock_state(n: int, n_trunc: int) -> DriveState:
    """フォック状態 |n⟩"""
    if not 0 <= n < n_trunc:
        raise ValidationError(f"フォック数 {n} は 0..{n_trunc - 1} の範囲で指定してください")
    amps = np.zeros(n_trunc, dtype=np.complex128)
    amps[n] = 1.0
    return DriveState(amps)


def initial_state(state: DriveState, tls: Optional[np.ndarray] = None) -> np.ndarray:
    """ρ_D ⊗ ρ_S（既定は励起状態 |e⟩）"""
    layout = HilbertLayout.from_dims(state.n_trunc, 2)
    return product_state([state.density(), EXCITED if tls is None else tls], layout)


# ============================================================
# 閉形式
# ============================================================

def closed_form_work(variant: str, params: JCParams, value, t):
    """仕事の閉形式

    Args:
        variant: "Q_FOCK"（value = n）、"CL_COH"、"Q_COH"（value = α）
        params: 模型のパラメータ
        value: フォック数または α
        t: 時刻（配列可）

    Returns:
        −ħω sin²(Ω_n t)、−ħω sin²(g|α|t)、または
        −ħω e^{−|α|²} Σ_{n<n_trunc} (|α|^{2n}/n!) sin²(Ω_n t)
    """
    t = np.asarray(t, dtype=float)
    w = params.omega
    if variant == "Q_FOCK":
        return -w * np.sin(params.rabi_frequency(int(value)) * t) ** 2
    if variant == "CL_COH":
        return -w * np.sin(params.g * abs(complex(value)) * t) ** 2
    if variant == "Q_COH":
        nbar = abs(complex(value)) ** 2
        n = np.arange(params.n_trunc)
        if nbar == 0.0:
            weights = (n == 0).astype(float)
        else:
            weights = np.exp(-nbar + n * math.log(nbar) - gammaln(n + 1.0))
        omegas = params.rabi_frequency(n)
        phases = np.multiply.outer(t, omegas)
        return -w * np.sin(phases) ** 2 @ weights
    raise ValidationError(f"未知の閉形式: {variant}")


def collapse_revival(times, w_q, params: JCParams, nbar: float,
                     collapse_tol: float = 0.1, revival_level: float = 0.5) -> Optional[tuple[float, float]]:
    """コヒーレント駆動の仕事の崩壊と復活を検出

    崩壊: 最初のラビ振動の後、|W + ħω/2| が1ラビ周期のあいだ collapse_tol 未満に留まる。
    復活: その後 |W| > revival_level かつ |W + ħω/2| > collapse_tol となる。

    Returns:
        (崩壊時刻, 復活時刻)。見つからなければ None
    """
    times = np.asarray(times, dtype=float)
    w_q = np.asarray(w_q, dtype=float)
    plateau = -0.5 * params.omega
    deviation = np.abs(w_q - plateau)
    peak = np.flatnonzero(np.abs(w_q) >= revival_level)
    if not peak.size:
        return None
    period = 2.0 * math.pi / float(params.rabi_frequency(nbar))
    window = max(1, int(np.searchsorted(times, times[0] + period)))
    if window > len(times):
        return None
    # 幅 window の区間での最大偏差
    quiet = np.lib.stride_tricks.sliding_window_view(deviation, window).max(axis=1) < collapse_tol
    candidates = np.flatnonzero(quiet[peak[0]:]) + peak[0]
    if not candidates.size:
        return None
    start = int(candidates[0])
    after = start + window
    revived = np.flatnonzero((np.abs(w_q[after:]) > revival_level) & (deviation[after:] > collapse_tol))
    if not revived.size:
        return None
    return float(times[start]), float(times[after + int(revived[0])])


# ============================================================
# 古典駆動
# ============================================================

def jc_drive_spec(params: JCParams, state: DriveState) -> ClassicalDriveSpec:
    """JC 模型の古典駆動設定"""
    ch = build_jc(params)
    return ClassicalDriveSpec(h_d=ch.h_d, rho_d0=state.density(), couplings=ch.h_sd)


def jc_classical_hamiltonian(state: DriveState, params: JCParams, t: float) -> np.ndarray:
    """(ħω/2)σ_z + e^{−iωt}Sσ₊ + e^{iωt}S*σ₋, S = g Σ a_n* a_{n+1} √(n+1)"""
    s = params.g * state.ladder_expectation()
    phase = np.exp(-1j * params.omega * t)
    return 0.5 * params.omega * SIGMA_Z + phase * s * SIGMA_PLUS + np.conj(phase * s) * SIGMA_MINUS


def jc_classical_propagator(state: DriveState, params: JCParams, t: float) -> np.ndarray:
    """古典駆動 JC の厳密な因子化伝搬子 U_D(t) ⊗ U_S(t)

    回転枠では有効ハミルトニアンが定数 Sσ₊ + S*σ₋ になるので
    U_S(t) = e^{−iH_S t} e^{−i(Sσ₊ + S*σ₋)t}。
    """
    s = params.g * state.ladder_expectation()
    h_s = 0.5 * params.omega * SIGMA_Z
    rotating = s * SIGMA_PLUS + np.conj(s) * SIGMA_MINUS
    u_s = unitary_exp(h_s, t) @ unitary_exp(rotating, t)
    u_d = unitary_exp(params.omega * number_operator(params.n_trunc), t)
    return kron(u_d, u_s)


# ============================================================
# 散逸
# ============================================================

def golden_rule_dissipator(params: JCParams, theta: float) -> LindbladSet:
    """黄金律による JC 固有状態間のジャンプ演算子

    γ(φ→φ') = Θ|⟨φ'|(I_D ⊗ σ_x)|φ⟩|²、ε_φ' < ε_φ の組のみ。
    ジャンプ演算子は計算基底で返す。
    """
    if theta < 0:
        raise ValidationError(f"theta は非負である必要があります: {theta}")
    if theta == 0:
        return LindbladSet.empty()
    ch = build_jc(params)
    layout = jc_layout(params)
    eig = hermitian_eig(assemble_total(ch, layout))
    coupling = kron(np.eye(params.n_trunc), SIGMA_X)
    elements = dagger(eig.vectors) @ coupling @ eig.vectors
    rates = theta * np.abs(elements) ** 2

    energies = eig.values
    scale = max(1.0, float(np.max(np.abs(energies))))
    jumps = []
    for source in range(eig.dim):
        for target in range(eig.dim):
            if energies[target] >= energies[source] - ENERGY_GAP_TOL * scale:
                continue
            rate = rates[target, source]
            if rate <= RATE_THRESHOLD:
                continue
            ket = eig.vectors[:, target:target + 1]
            bra = dagger(eig.vectors[:, source:source + 1])
            jumps.append(math.sqrt(rate) * (ket @ bra))
    logger.debug("黄金律ジャンプ演算子: %d 本 (Θ=%g, n_trunc=%d)", len(jumps), theta, params.n_trunc)
    return LindbladSet(tuple(jumps))


# ============================================================
# 実験
# ============================================================

def jc_unitary_run(params: JCParams, state: DriveState, t_max: float, step: float) -> EnergyLedger:
    """ρ_D ⊗ |e⟩⟨e| からのユニタリ発展と収支"""
    ch = build_jc(params)
    layout = jc_layout(params)
    if state.n_trunc != params.n_trunc:
        raise ValidationError(f"駆動状態の次元 {state.n_trunc} が n_trunc={params.n_trunc} と一致しません")
    traj = evolve_unitary(initial_state(state), assemble_total(ch, layout), uniform_grid(t_max, step))
    return accumulate_ledger(traj, ch, None, layout)


def jc_relaxation_run(params: JCParams, theta: float, t_max: float, step: float, fock: int = 0) -> EnergyLedger:
    """|n⟩ ⊗ |e⟩ からの黄金律散逸つき発展と収支（既定は n = 0）

    Raises:
        ConvergenceError: t_max までに全仕事率・熱流が 1e−6 未満にならない
    """
    ch = build_jc(params)
    layout = jc_layout(params)
    ls = golden_rule_dissipator(params, theta)
    rho0 = initial_state(fock_state(fock, params.n_trunc))
    traj = evolve_lindblad(rho0, assemble_total(ch, layout), ls, uniform_grid(t_max, step), step)
    ledger = accumulate_ledger(traj, ch, ls, layout)
    t_stat = ledger.stationary_time(STATIONARY_POWER_TOL)
    if t_stat is None:
        raise ConvergenceError(
            f"t_max={t_max} までに定常状態に達しませんでした。t_max を大きくしてください"
        )
    logger.info("定常到達 t=%.3f, Q_tot=%.6f, ΔH_D=%.6f", t_stat, ledger.q_tot[-1], ledger.delta_h_d[-1])
    return ledger
