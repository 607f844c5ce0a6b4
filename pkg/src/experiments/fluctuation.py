"""二回測定による仕事統計

系ハミルトニアン H_S を t = 0 と t = T で射影測定し、排他的仕事
W = ε_k − ε_n の分布、修正ボチコフ–クズヴレフ平均 ⟨e^{−βW}⟩、
平均力の分配関数 Z′_S(t) を求める。

規約:
    - 環境は駆動の間は切り離されているものとし、リンドブラッド集合は受け付けない
    - 最初の測定は S のみを射影し、ρ_D(0) はそのまま残す
    - JC の閉形式に現れる P_ee, P_gg は条件付き確率 P(k|n) と読む。
      二準位のギブス初期状態で Σ_{k,n} e^{−β(ε_k−ε_n)} p_n P_{k,n} を展開すると
      1 + (1/Z_S)(e^{−βħω/2} − e^{βħω/2})(P_ee − P_gg) がそのまま得られる
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from physics.composite_model import HilbertLayout, assemble_total, ensure_density
from physics.dynamics import LindbladSet, unitary_propagator
from physics.errors import NumericalFloorError, UnsupportedModelError, ValidationError
from physics.tensor_algebra import (
    as_matrix,
    dagger,
    ensure_hermitian,
    hermitian_eig,
    kron,
    matrix_function,
    min_eigenvalue,
    partial_trace,
)
from .jaynes_cummings import (
    DriveState,
    JCParams,
    build_jc,
    coherent_state,
    default_truncation,
    jc_classical_propagator,
    jc_layout,
)

logger = logging.getLogger(__name__)

# ユニタリ性の許容値
UNITARY_TOL = 1e-10

# 固有値が縮退しているとみなす間隔（相対）
DEGENERACY_TOL = 1e-10

# 対数を取れる偏差の下限
DEVIATION_FLOOR = 1e-13

WORK_COLUMNS = ["n", "k", "work", "probability"]
SWEEP_COLUMNS = ["nbar", "T", "bk_average", "deviation", "n_trunc"]


@dataclass
class TmaResult:
    """二回測定の結果

    Attributes:
        eigenvalues: H_S の固有値 ε_n（昇順）
        initial_probs: 逆温度 beta のギブス重み p_n
        conditional_probs: P[k, n] = 初期 n のとき終状態 k を得る確率
        beta: 初期状態の逆温度
    """

    eigenvalues: np.ndarray
    initial_probs: np.ndarray
    conditional_probs: np.ndarray
    beta: float

    @property
    def work_support(self) -> np.ndarray:
        """W[k, n] = ε_k − ε_n"""
        return self.eigenvalues[:, None] - self.eigenvalues[None, :]

    @property
    def joint(self) -> np.ndarray:
        """結合確率 P[k, n]·p_n"""
        return self.conditional_probs * self.initial_probs[None, :]

    def column_sums(self) -> np.ndarray:
        return self.conditional_probs.sum(axis=0)

    def row_sums(self) -> np.ndarray:
        return self.conditional_probs.sum(axis=1)


@dataclass
class MeanForceSummary:
    """平均力ハミルトニアンの要約

    Attributes:
        z_prime: Z′_S(t) = Tr_S Tr_D{e^{−βH_S^H(t)} ρ_D(0)}
        h_star: H*_S(t) = −β⁻¹ ln Tr_D{e^{−βH_S^H(t)} ρ_D(0)}
        e_prime: 対応する内部エネルギー E′_S(t)
        f_prime: 自由エネルギー F′_S(t) = −β⁻¹ ln Z′_S(t)
        beta: 逆温度
    """

    z_prime: float
    h_star: np.ndarray = field(repr=False)
    e_prime: float
    f_prime: float
    beta: float


def _check_bipartite(layout: HilbertLayout) -> None:
    if layout.labels != ("D", "S"):
        raise UnsupportedModelError(
            f"二回測定は環境を切り離した D⊗S 上でのみ扱います: {layout.labels}"
        )


def _check_unitary(u, layout: HilbertLayout, name: str) -> np.ndarray:
    u = as_matrix(u, name)
    if u.shape[0] != layout.total_dim:
        raise ValidationError(f"{name} の次元 {u.shape[0]} がレイアウトの次元 {layout.total_dim} と一致しません")
    err = float(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0]))))
    if err > UNITARY_TOL:
        raise ValidationError(f"{name} がユニタリではありません (‖U†U − I‖ = {err:.3e})")
    return u


def _check_drive_and_system(rho_d0, h_s, layout: HilbertLayout) -> tuple[np.ndarray, np.ndarray]:
    rho_d = ensure_density(rho_d0, "rho_D(0)")
    h_s = ensure_hermitian(h_s, "H_S")
    if rho_d.shape[0] != layout.dim_of("D"):
        raise ValidationError(f"rho_D(0) の次元 {rho_d.shape[0]} が D の次元 {layout.dim_of('D')} と一致しません")
    if h_s.shape[0] != layout.dim_of("S"):
        raise ValidationError(f"H_S の次元 {h_s.shape[0]} が S の次元 {layout.dim_of('S')} と一致しません")
    return rho_d, h_s


def gibbs_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    """p_n = e^{−βε_n}/Z_S"""
    energies = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (energies - energies.min()))
    return w / w.sum()


def tma_probabilities(u_T, rho_d0, h_s, layout: HilbertLayout, beta: float = 1.0,
                      ls: Optional[LindbladSet] = None) -> TmaResult:
    """二回測定の条件付き確率 P_{k,n}

    P_{k,n} = Tr_D{⟨k|U(T)·ρ_D(0)⊗|n⟩⟨n|·U†(T)|k⟩}

    Args:
        u_T: D⊗S 上の時間発展演算子
        rho_d0: 駆動系の初期状態
        h_s: 系ハミルトニアン（非縮退）
        layout: D⊗S のレイアウト
        beta: 初期ギブス状態の逆温度
        ls: 渡された場合は非空なら拒否する

    Raises:
        UnsupportedModelError: H_S の縮退、環境スロット、リンドブラッド集合
        ValidationError: ユニタリでない u_T、次元の不一致、負の beta
    """
    if ls is not None and not ls.is_empty:
        raise UnsupportedModelError("二回測定は閉じた D⊗S の発展のみ扱います（リンドブラッド集合は不可）")
    if beta < 0:
        raise ValidationError(f"beta は非負である必要があります: {beta}")
    _check_bipartite(layout)
    u = _check_unitary(u_T, layout, "U(T)")
    rho_d, h_s = _check_drive_and_system(rho_d0, h_s, layout)

    es = hermitian_eig(h_s)
    scale = max(1.0, float(np.max(np.abs(es.values))))
    gaps = np.diff(es.values)
    if gaps.size and float(gaps.min()) <= DEGENERACY_TOL * scale:
        raise UnsupportedModelError(
            f"H_S が縮退しています (最小準位間隔 {gaps.min():.3e})。非縮退の系のみ対応します"
        )

    n_levels = es.dim
    probs = np.empty((n_levels, n_levels))
    vectors = es.vectors
    for n in range(n_levels):
        ket = vectors[:, n:n + 1]
        rho_m = kron(rho_d, ket @ dagger(ket))
        rho_s = partial_trace(u @ rho_m @ dagger(u), layout, {"S"})
        probs[:, n] = np.einsum("ik,ij,jk->k", np.conj(vectors), rho_s, vectors).real
    probs = np.clip(probs, 0.0, 1.0)

    logger.debug("二回測定: %d 準位, 列和の最大ずれ %.3e", n_levels, float(np.max(np.abs(probs.sum(0) - 1.0))))
    return TmaResult(
        eigenvalues=es.values,
        initial_probs=gibbs_weights(es.values, beta),
        conditional_probs=probs,
        beta=float(beta),
    )


def _check_beta(res: TmaResult, beta: float) -> None:
    if abs(res.beta - beta) > 1e-12 * max(1.0, abs(beta)):
        raise ValidationError(f"初期状態の beta={res.beta} と指定した beta={beta} が一致しません")


def bk_average(res: TmaResult, beta: float) -> float:
    """⟨e^{−βW}⟩ を軌道の和 Σ_{k,n} e^{−β(ε_k−ε_n)} p_n P_{k,n} として評価"""
    _check_beta(res, beta)
    return float(np.sum(np.exp(-beta * res.work_support) * res.joint))


def bk_average_rearranged(res: TmaResult, beta: float) -> float:
    """⟨e^{−βW}⟩ = Σ_k (e^{−βε_k}/Z_S) Σ_n P_{k,n}"""
    _check_beta(res, beta)
    return float(np.dot(gibbs_weights(res.eigenvalues, beta), res.row_sums()))


def work_distribution(res: TmaResult) -> pd.DataFrame:
    """排他的仕事の分布（列 n, k, work, probability）"""
    n_levels = len(res.eigenvalues)
    k_idx, n_idx = np.meshgrid(np.arange(n_levels), np.arange(n_levels), indexing="ij")
    return pd.DataFrame({
        "n": n_idx.ravel(),
        "k": k_idx.ravel(),
        "work": res.work_support.ravel(),
        "probability": res.joint.ravel(),
    }, columns=WORK_COLUMNS).sort_values(["n", "k"]).reset_index(drop=True)


def work_histogram(res: TmaResult, decimals: int = 12) -> pd.DataFrame:
    """仕事の値ごとに集計した分布（列 work, probability）"""
    df = work_distribution(res)
    df["work"] = df["work"].round(decimals)
    return df.groupby("work", as_index=False)["probability"].sum()


# ============================================================
# 平均力
# ============================================================

def mean_force_summary(u_t, rho_d0, h_s, beta: float, layout: HilbertLayout) -> MeanForceSummary:
    """平均力ハミルトニアンと分配関数

    H_S^H(t) = U†(I_D⊗H_S)U なので e^{−βH_S^H} = U†(I_D⊗e^{−βH_S})U を使う。

    Raises:
        ValidationError: beta ≤ 0、ユニタリでない u_t
        NumericalFloorError: 駆動平均した指数が正定値でない
    """
    if beta <= 0:
        raise ValidationError(f"beta は正である必要があります: {beta}")
    _check_bipartite(layout)
    u = _check_unitary(u_t, layout, "U(t)")
    rho_d, h_s = _check_drive_and_system(rho_d0, h_s, layout)

    eye_d = np.eye(layout.dim_of("D"))
    h_heis = dagger(u) @ kron(eye_d, h_s) @ u
    g_heis = dagger(u) @ kron(eye_d, matrix_function(h_s, "gibbs", beta)) @ u
    weighted = g_heis @ kron(rho_d, np.eye(layout.dim_of("S")))

    m = partial_trace(weighted, layout, {"S"})
    m = 0.5 * (m + dagger(m))
    lam = min_eigenvalue(m)
    if lam <= 0.0:
        raise NumericalFloorError(f"駆動平均した指数が正定値ではありません (最小固有値 {lam:.3e})")

    z = float(np.trace(m).real)
    e = float(np.einsum("ij,ji->", weighted, h_heis).real) / z
    h_star = -matrix_function(m, "log") / beta
    return MeanForceSummary(
        z_prime=z,
        h_star=0.5 * (h_star + dagger(h_star)),
        e_prime=e,
        f_prime=-math.log(z) / beta,
        beta=float(beta),
    )


def mean_force_series(h_total, rho_d0, h_s, beta: float, layout: HilbertLayout,
                      times: Sequence[float]) -> pd.DataFrame:
    """時刻列での Z′_S(t), E′_S(t), F′_S(t)（列 t, z_prime, e_prime, f_prime）"""
    eig = hermitian_eig(h_total)
    rows = []
    for t in times:
        u = matrix_function(None, "unitary_exp", float(t), eig=eig)
        s = mean_force_summary(u, rho_d0, h_s, beta, layout)
        rows.append({"t": float(t), "z_prime": s.z_prime, "e_prime": s.e_prime, "f_prime": s.f_prime})
    return pd.DataFrame(rows, columns=["t", "z_prime", "e_prime", "f_prime"])


# ============================================================
# JC 模型
# ============================================================

def bk_time(nbar: float, g: float) -> float:
    """T = π/(2g√n̄)"""
    return math.pi / (2.0 * g * math.sqrt(nbar))


def jc_population_difference(state: DriveState, params: JCParams, T: float) -> float:
    """P_ee − P_gg = Σ|a_n|²[cos²(Ω_n T) − cos²(Ω_{n−1} T)], Ω_{n−1} = g√n"""
    n = np.arange(state.n_trunc, dtype=float)
    stay_e = np.cos(params.g * np.sqrt(n + 1.0) * T) ** 2
    stay_g = np.cos(params.g * np.sqrt(n) * T) ** 2
    return float(np.dot(state.populations, stay_e - stay_g))


def jc_bk_closed_form(state: DriveState, params: JCParams, T: float, beta: float) -> float:
    """1 + (1/Z_S)(e^{−βħω/2} − e^{βħω/2})(P_ee − P_gg)"""
    half = 0.5 * beta * params.omega
    prefactor = -math.tanh(half)
    return 1.0 + prefactor * jc_population_difference(state, params, T)


def large_nbar_deviation(alpha: complex, params: JCParams) -> float:
    """大きな n̄ での P_ee − P_gg ≈ −(π/4n̄) Σ|a_n|² sin(π√n/√n̄)（T = π/(2g√n̄)）"""
    nbar = abs(complex(alpha)) ** 2
    if nbar < 1.0:
        raise ValidationError(f"n̄ = |α|² は1以上である必要があります: {nbar}")
    state = coherent_state(alpha, params.n_trunc)
    n = np.arange(state.n_trunc, dtype=float)
    return float(-math.pi / (4.0 * nbar) * np.dot(state.populations, np.sin(math.pi * np.sqrt(n / nbar))))


def jc_tma(state: DriveState, params: JCParams, T: float, beta: float,
           propagation: str = "quantum") -> TmaResult:
    """JC 模型の二回測定（quantum: 全ハミルトニアン、classical: 因子化伝搬子）"""
    if state.n_trunc != params.n_trunc:
        raise ValidationError(f"駆動状態の次元 {state.n_trunc} が n_trunc={params.n_trunc} と一致しません")
    ch = build_jc(params)
    layout = jc_layout(params)
    if propagation == "quantum":
        u = unitary_propagator(assemble_total(ch, layout), T)
    elif propagation == "classical":
        u = jc_classical_propagator(state, params, T)
    else:
        raise ValidationError(f"未知の伝搬方式: {propagation}")
    return tma_probabilities(u, state.density(), ch.h_s, layout, beta)


def bk_identity_summary(nbar: float, params: JCParams, beta: float) -> dict:
    """コヒーレント駆動での BK 平均の各経路の比較

    Returns:
        nbar, T, beta, bk_average, bk_average_rearranged, deviation, closed_form,
        approx, population_difference, z_ratio, norm_deficit を持つ辞書
    """
    alpha = math.sqrt(nbar)
    T = bk_time(nbar, params.g)
    state = coherent_state(alpha, params.n_trunc)
    res = jc_tma(state, params, T, beta)
    avg = bk_average(res, beta)

    ch = build_jc(params)
    layout = jc_layout(params)
    u_T = unitary_propagator(assemble_total(ch, layout), T)
    z_T = mean_force_summary(u_T, state.density(), ch.h_s, beta, layout).z_prime
    z_0 = mean_force_summary(np.eye(layout.total_dim), state.density(), ch.h_s, beta, layout).z_prime

    prefactor = -math.tanh(0.5 * beta * params.omega)
    summary = {
        "nbar": float(nbar),
        "T": T,
        "beta": float(beta),
        "bk_average": avg,
        "bk_average_rearranged": bk_average_rearranged(res, beta),
        "deviation": avg - 1.0,
        "closed_form": jc_bk_closed_form(state, params, T, beta),
        "approx": prefactor * large_nbar_deviation(alpha, params),
        "population_difference": jc_population_difference(state, params, T),
        "z_ratio": z_T / z_0,
        "norm_deficit": state.norm_deficit,
    }
    logger.info("n̄=%g: ⟨e^{−βW}⟩ − 1 = %.6e (閉形式との差 %.3e)",
                nbar, summary["deviation"], abs(avg - summary["closed_form"]))
    return summary


# ============================================================
# n̄ スイープ
# ============================================================

@dataclass
class BkSweepResult:
    """BK 偏差の n̄ スイープ

    Attributes:
        points: 列 nbar, T, bk_average, deviation, n_trunc の DataFrame（入力順）
        slope: ln|⟨e^{−βW}⟩ − 1| の ln n̄ に対する最小二乗傾き
        beta: 逆温度
        propagation: "closed_form"、"quantum"、"classical" のいずれか
        omega: 共鳴角振動数
    """

    points: pd.DataFrame
    slope: float
    beta: float
    propagation: str
    omega: float = 1.0

    def summary(self) -> dict:
        return {
            "beta": self.beta,
            "propagation": self.propagation,
            "omega": self.omega,
            "slope": self.slope,
            "nbar": [float(v) for v in self.points["nbar"]],
            "deviation": [float(v) for v in self.points["deviation"]],
        }


def _bk_point(nbar: float, g: float, beta: float, propagation: str,
              omega: float = 1.0, n_trunc_floor: Optional[int] = None) -> dict:
    n_trunc = max(default_truncation(nbar), n_trunc_floor or 0)
    params = JCParams(g=g, n_trunc=n_trunc, omega=omega)
    T = bk_time(nbar, g)
    state = coherent_state(math.sqrt(nbar), params.n_trunc)
    if propagation == "closed_form":
        avg = jc_bk_closed_form(state, params, T, beta)
    else:
        avg = bk_average(jc_tma(state, params, T, beta, propagation), beta)
    logger.debug("n̄=%g (%s): ⟨e^{−βW}⟩ = %.17g", nbar, propagation, avg)
    return {"nbar": float(nbar), "T": T, "bk_average": avg, "deviation": avg - 1.0, "n_trunc": n_trunc}


def bk_scaling_sweep(nbar_list: Sequence[float], g: float, beta: float,
                     propagation: str = "closed_form", workers: int = 1,
                     omega: float = 1.0, n_trunc_floor: Optional[int] = None) -> BkSweepResult:
    """T = π/(2g√n̄) での BK 偏差の両対数傾き

    Args:
        nbar_list: 3点以上で1桁以上にわたる n̄ の列
        g: 結合強度
        beta: 逆温度
        propagation: "closed_form"（閉形式）、"quantum"（行列による二回測定）、
            "classical"（因子化伝搬子）
        workers: 並列に評価する n̄ 点の数
        omega: 共鳴角振動数
        n_trunc_floor: 各点の打ち切りの下限（各点は default_truncation(n̄) 以上を使う）

    Raises:
        ValidationError: n̄ の列が条件を満たさない
        NumericalFloorError: 偏差が 1e−13 未満で対数が取れない
    """
    nbars = [float(v) for v in nbar_list]
    if len(nbars) < 3:
        raise ValidationError(f"nbar は3点以上必要です: {nbars}")
    if min(nbars) < 1.0:
        raise ValidationError(f"nbar は1以上である必要があります: {nbars}")
    if max(nbars) / min(nbars) < 10.0:
        raise ValidationError(f"nbar は1桁以上の範囲にわたる必要があります: {nbars}")
    if propagation not in ("closed_form", "quantum", "classical"):
        raise ValidationError(f"未知の伝搬方式: {propagation}")
    if workers < 1:
        raise ValidationError(f"workers は1以上である必要があります: {workers}")

    args = [(nbar, g, beta, propagation, omega, n_trunc_floor) for nbar in nbars]
    if workers == 1:
        rows = [_bk_point(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda a: _bk_point(*a), args))

    points = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    dev = np.abs(points["deviation"].to_numpy())
    below = points["nbar"][dev < DEVIATION_FLOOR].tolist()
    if below:
        raise NumericalFloorError(
            f"n̄ = {below} で偏差が {DEVIATION_FLOOR:g} 未満です（古典駆動では恒等式が厳密に成り立ちます）"
        )
    slope = float(np.polyfit(np.log(points["nbar"].to_numpy()), np.log(dev), 1)[0])
    logger.info("BK 偏差のスケーリング傾き %.4f (%s, β=%g)", slope, propagation, beta)
    return BkSweepResult(points=points, slope=slope, beta=float(beta), propagation=propagation,
                         omega=float(omega))
