"""状態の時間発展

固有値分解による厳密なユニタリ発展、リンドブラッド方程式の固定刻み RK4 積分、
古典駆動極限で使う時間依存ハミルトニアンの発展を扱う。

散逸子の規約は D(ρ) = Σ {2LρL† − L†Lρ − ρL†L}（全体に 1/2 を掛けない）。
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .composite_model import ensure_density
from .errors import IntegrationError, ValidationError
from .tensor_algebra import (
    EigenSystem,
    as_matrix,
    dagger,
    ensure_hermitian,
    hermitian_eig,
    matrix_function,
)

logger = logging.getLogger(__name__)

# 記録サンプルでのトレースずれ・負固有値の打ち切り閾値
ABORT_TOL = 1e-6

# この次元以下ではリウヴィル超演算子で RK4 ステップ行列を作る
SUPEROPERATOR_MAX_DIM = 16

# ユニタリ軌道の期待値を評価するときの時刻チャンク
EXPECTATION_CHUNK = 2048

# 刻み幅が区間を割り切るかの相対許容誤差
GRID_TOL = 1e-9

HamiltonianProvider = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class LindbladSet:
    """ジャンプ演算子の集合（各 L は √rate 倍済み）"""

    jumps: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        checked = []
        for k, op in enumerate(self.jumps):
            m = as_matrix(op, f"L[{k}]")
            if not np.all(np.isfinite(m)):
                raise ValidationError(f"L[{k}] に有限でない成分があります")
            if checked and m.shape != checked[0].shape:
                raise ValidationError(f"L[{k}] の次元 {m.shape} が他のジャンプ演算子と異なります")
            checked.append(m)
        object.__setattr__(self, "jumps", tuple(checked))

    @classmethod
    def empty(cls) -> "LindbladSet":
        return cls(())

    @property
    def is_empty(self) -> bool:
        return not self.jumps

    @property
    def dim(self) -> Optional[int]:
        return self.jumps[0].shape[0] if self.jumps else None

    def __len__(self) -> int:
        return len(self.jumps)

    def check_dim(self, dim: int) -> None:
        if self.jumps and self.dim != dim:
            raise ValidationError(f"ジャンプ演算子の次元 {self.dim} が状態の次元 {dim} と一致しません")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """D(ρ)"""
        out = np.zeros_like(rho, dtype=np.complex128)
        for op in self.jumps:
            op_dag = dagger(op)
            n = op_dag @ op
            out += 2.0 * op @ rho @ op_dag - n @ rho - rho @ n
        return out

    def adjoint(self, x: np.ndarray) -> np.ndarray:
        """随伴散逸子 D†(X) = Σ {2L†XL − L†LX − XL†L}

        Tr{D(ρ)X} = Tr{ρ D†(X)} を満たす。
        """
        out = np.zeros_like(x, dtype=np.complex128)
        for op in self.jumps:
            op_dag = dagger(op)
            n = op_dag @ op
            out += 2.0 * op_dag @ x @ op - n @ x - x @ n
        return out

    def superoperator(self, dim: int) -> np.ndarray:
        """行優先の vec(ρ) に作用する散逸子の行列表現"""
        eye = np.eye(dim)
        sup = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
        for op in self.jumps:
            n = dagger(op) @ op
            sup += 2.0 * np.kron(op, np.conj(op)) - np.kron(n, eye) - np.kron(eye, n.T)
        return sup


class Trajectory:
    """時刻列と各時刻の密度行列

    Attributes:
        times: 昇順の時刻列
        states: (時刻数, d, d) の密度行列配列
    """

    def __init__(self, times, states: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self._states = np.asarray(states, dtype=np.complex128)
        if self._states.shape[0] != self.times.shape[0]:
            raise ValidationError("時刻数と状態数が一致しません")

    @property
    def states(self) -> np.ndarray:
        return self._states

    @property
    def dim(self) -> int:
        return int(self._states.shape[1])

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def state(self, index: int) -> np.ndarray:
        """index 番目の時刻の密度行列"""
        return self._states[index]

    @property
    def initial_state(self) -> np.ndarray:
        return self.state(0)

    @property
    def final_state(self) -> np.ndarray:
        return self.state(len(self) - 1)

    def expectations(self, ops: Sequence[np.ndarray]) -> np.ndarray:
        """各演算子 X について Tr{ρ(t)X} の時系列

        Returns:
            (演算子数, 時刻数) の複素配列
        """
        return np.stack([np.einsum("nij,ji->n", self._states, as_matrix(op)) for op in ops])

    def expectation(self, op: np.ndarray) -> np.ndarray:
        """Tr{ρ(t)X} の時系列"""
        return self.expectations([op])[0]

    def diagnostics(self) -> dict[str, float]:
        """全サンプルでのトレースずれ最大値と最小固有値"""
        traces = np.einsum("nii->n", self._states)
        eigs = np.linalg.eigvalsh(0.5 * (self._states + np.conj(np.swapaxes(self._states, 1, 2))))
        return {
            "max_trace_drift": float(np.max(np.abs(traces - 1.0))),
            "min_eigenvalue": float(np.min(eigs[:, 0])),
        }


class UnitaryTrajectory(Trajectory):
    """固有基底で遅延評価するユニタリ軌道

    ρ(t) = V e^{−iΛt} ρ̃₀ e^{iΛt} V† を必要なときだけ作る。
    期待値は Σ_ab u_a(t) ρ̃₀_ab X̃_ba u_b(t)* として全状態を作らずに評価する。
    """

    def __init__(self, times, rho0: np.ndarray, eig: EigenSystem):
        self.times = np.asarray(times, dtype=float)
        self._eig = eig
        self._rho0_eig = dagger(eig.vectors) @ rho0 @ eig.vectors
        self._cache: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self._eig.dim

    @property
    def states(self) -> np.ndarray:
        if self._cache is None:
            logger.debug("ユニタリ軌道の全状態を展開します (%d 時刻, 次元 %d)", len(self), self.dim)
            self._cache = np.stack([self.state(i) for i in range(len(self))])
        return self._cache

    def state(self, index: int) -> np.ndarray:
        u = np.exp(-1j * self._eig.values * self.times[index])
        rho_t = (u[:, None] * self._rho0_eig) * np.conj(u)[None, :]
        v = self._eig.vectors
        return v @ rho_t @ dagger(v)

    def expectations(self, ops: Sequence[np.ndarray]) -> np.ndarray:
        v = self._eig.vectors
        weights = [self._rho0_eig * (dagger(v) @ as_matrix(op) @ v).T for op in ops]
        out = np.empty((len(weights), len(self)), dtype=np.complex128)
        for start in range(0, len(self), EXPECTATION_CHUNK):
            stop = min(start + EXPECTATION_CHUNK, len(self))
            u = np.exp(-1j * np.outer(self.times[start:stop], self._eig.values))
            uc = np.conj(u)
            for k, w in enumerate(weights):
                out[k, start:stop] = np.sum((u @ w) * uc, axis=1)
        return out

    def diagnostics(self) -> dict[str, float]:
        # ユニタリ発展はスペクトルを保存する
        lam = np.linalg.eigvalsh(0.5 * (self._rho0_eig + dagger(self._rho0_eig)))
        return {
            "max_trace_drift": float(abs(np.trace(self._rho0_eig) - 1.0)),
            "min_eigenvalue": float(lam[0]),
        }


def uniform_grid(t_max: float, step: float) -> np.ndarray:
    """0 から t_max までの等間隔時刻列（step 刻み、端点は floor）"""
    if t_max < 0 or step <= 0:
        raise ValidationError(f"t_max は非負、step は正である必要があります: t_max={t_max}, step={step}")
    n = int(np.floor(t_max / step + GRID_TOL))
    return step * np.arange(n + 1)


def _check_grid(grid) -> np.ndarray:
    times = np.asarray(grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValidationError("時刻列が空です")
    if times[0] < 0:
        raise ValidationError(f"時刻列は 0 以上から始まる必要があります: {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise ValidationError("時刻列は狭義単調増加である必要があります")
    return times


def _substeps(grid: np.ndarray, step: float) -> np.ndarray:
    """各区間を step で割ったステップ数。割り切れなければ ValidationError"""
    if step <= 0:
        raise ValidationError(f"step は正である必要があります: {step}")
    spans = np.diff(np.concatenate([[0.0], grid]))
    counts = np.rint(spans / step).astype(int)
    bad = np.abs(counts * step - spans) > GRID_TOL * np.maximum(1.0, spans)
    if np.any(bad):
        raise ValidationError(f"step={step} が時刻列の区間を割り切りません")
    return counts


def _check_model(rho0, h, ls: Optional[LindbladSet]) -> tuple[np.ndarray, np.ndarray]:
    rho0 = ensure_density(rho0, "rho0")
    h = ensure_hermitian(h, "h")
    if h.shape != rho0.shape:
        raise ValidationError(f"ハミルトニアン {h.shape} と初期状態 {rho0.shape} の次元が一致しません")
    if ls is not None:
        ls.check_dim(h.shape[0])
    return rho0, h


def _monitor(traj: Trajectory, step: float) -> Trajectory:
    diag = traj.diagnostics()
    logger.debug(
        "積分完了: %d サンプル, トレースずれ %.3e, 最小固有値 %.3e",
        len(traj), diag["max_trace_drift"], diag["min_eigenvalue"],
    )
    if diag["max_trace_drift"] > ABORT_TOL:
        raise IntegrationError(
            f"トレースが {diag['max_trace_drift']:.3e} ずれました。step={step} より小さい刻みを指定してください"
        )
    if diag["min_eigenvalue"] < -ABORT_TOL:
        raise IntegrationError(
            f"密度行列の最小固有値が {diag['min_eigenvalue']:.3e} になりました。step={step} より小さい刻みを指定してください"
        )
    return traj


def unitary_propagator(h, t: float) -> np.ndarray:
    """U(t) = e^{−iHt}"""
    return matrix_function(h, "unitary_exp", t)


def evolve_unitary(rho0, h, grid) -> UnitaryTrajectory:
    """ρ(t) = U(t)ρ₀U(t)† の軌道

    Args:
        rho0: 初期密度行列
        h: 時間に依存しないハミルトニアン
        grid: 昇順の時刻列

    Returns:
        固有基底で遅延評価される軌道
    """
    rho0, h = _check_model(rho0, h, None)
    times = _check_grid(grid)
    return UnitaryTrajectory(times, rho0, hermitian_eig(h))


def apply_dissipator(rho, ls: LindbladSet) -> np.ndarray:
    """散逸子 D(ρ) を評価"""
    rho = as_matrix(rho, "rho")
    ls.check_dim(rho.shape[0])
    return ls.apply(rho)


def liouvillian(h: np.ndarray, ls: LindbladSet) -> np.ndarray:
    """行優先 vec に作用する −i[H, ·] + D の行列"""
    d = h.shape[0]
    eye = np.eye(d)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T)) + ls.superoperator(d)


def _rk4_matrix(gen: np.ndarray, step: float) -> np.ndarray:
    """線形生成子に対する RK4 の1ステップ行列 Σ_{k≤4} (hL)^k/k!"""
    a = step * gen
    eye = np.eye(gen.shape[0], dtype=np.complex128)
    a2 = a @ a
    a3 = a2 @ a
    return eye + a + a2 / 2.0 + a3 / 6.0 + (a3 @ a) / 24.0


def _rhs(h: np.ndarray, ls: Optional[LindbladSet], rho: np.ndarray) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    if ls is not None and not ls.is_empty:
        out += ls.apply(rho)
    return out


def _rk4_step(
    rho: np.ndarray, h0: np.ndarray, h_mid: np.ndarray, h1: np.ndarray,
    ls: Optional[LindbladSet], step: float,
) -> np.ndarray:
    k1 = _rhs(h0, ls, rho)
    k2 = _rhs(h_mid, ls, rho + 0.5 * step * k1)
    k3 = _rhs(h_mid, ls, rho + 0.5 * step * k2)
    k4 = _rhs(h1, ls, rho + step * k3)
    return rho + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve_lindblad(rho0, h, ls: LindbladSet, grid, step: float) -> Trajectory:
    """リンドブラッド方程式 ρ̇ = −i[H, ρ] + D(ρ) の固定刻み RK4 積分

    Args:
        rho0: 初期密度行列
        h: ハミルトニアン
        ls: ジャンプ演算子の集合（空ならユニタリ極限）
        grid: 記録する時刻列
        step: 積分刻み（各区間を割り切ること）

    Returns:
        記録時刻での軌道

    Raises:
        IntegrationError: トレースずれまたは負固有値が 1e−6 を超えた
    """
    rho0, h = _check_model(rho0, h, ls)
    times = _check_grid(grid)
    counts = _substeps(times, step)
    d = h.shape[0]
    states = np.empty((len(times), d, d), dtype=np.complex128)

    if d <= SUPEROPERATOR_MAX_DIM:
        # 生成子が一定なので RK4 の1ステップは固定行列になる
        stepper = _rk4_matrix(liouvillian(h, ls), step)
        powers: dict[int, np.ndarray] = {}
        vec = rho0.reshape(-1).copy()
        for i, m in enumerate(counts):
            if m not in powers:
                powers[m] = np.linalg.matrix_power(stepper, int(m))
            vec = powers[m] @ vec
            states[i] = vec.reshape(d, d)
    else:
        rho = rho0.copy()
        for i, m in enumerate(counts):
            for _ in range(int(m)):
                rho = _rk4_step(rho, h, h, h, ls, step)
            states[i] = rho

    logger.debug("リンドブラッド積分: 次元 %d, ジャンプ %d 本, 総ステップ %d", d, len(ls), int(counts.sum()))
    return _monitor(Trajectory(times, states), step)


def evolve_time_dependent(
    rho0, h_of_t: HamiltonianProvider, grid, step: float, ls: Optional[LindbladSet] = None
) -> Trajectory:
    """時間依存ハミルトニアンの RK4 積分

    ハミルトニアンは各ステップで t, t+step/2, t+step の3点で評価する。

    Args:
        rho0: 初期密度行列
        h_of_t: 時刻を受け取りエルミート行列を返す関数
        grid: 記録する時刻列
        step: 積分刻み
        ls: 任意のジャンプ演算子の集合

    Returns:
        記録時刻での軌道
    """
    rho0 = ensure_density(rho0, "rho0")
    times = _check_grid(grid)
    counts = _substeps(times, step)
    d = rho0.shape[0]
    if ls is not None:
        ls.check_dim(d)

    def hamiltonian(t: float) -> np.ndarray:
        h = ensure_hermitian(h_of_t(t), f"H({t:g})")
        if h.shape != (d, d):
            raise ValidationError(f"H({t:g}) の次元 {h.shape} が状態の次元 {d} と一致しません")
        return h

    states = np.empty((len(times), d, d), dtype=np.complex128)
    rho = rho0.copy()
    t = 0.0
    h0 = hamiltonian(t)
    for i, m in enumerate(counts):
        for k in range(int(m)):
            # 区間の途中でも時刻は整数倍で作って丸め誤差の蓄積を避ける
            t_start = times[i] - (int(m) - k) * step
            h_mid = hamiltonian(t_start + 0.5 * step)
            h1 = hamiltonian(t_start + step)
            rho = _rk4_step(rho, h0, h_mid, h1, ls, step)
            h0 = h1
        states[i] = rho

    logger.debug("時間依存積分: 次元 %d, 総ステップ %d", d, int(counts.sum()))
    return _monitor(Trajectory(times, states), step)


def rk4_error_ratio(rho0, h, ls: LindbladSet, t_final: float, step: float) -> float:
    """刻み半減による RK4 の収束比

    step, step/2, step/4 で t_final まで積分し、
    ‖ρ_h − ρ_{h/2}‖ / ‖ρ_{h/2} − ρ_{h/4}‖ を返す（4次なら約16）。
    """
    finals = []
    for s in (step, step / 2.0, step / 4.0):
        traj = evolve_lindblad(rho0, h, ls, [t_final], s)
        finals.append(traj.final_state)
    coarse = np.linalg.norm(finals[0] - finals[1])
    fine = np.linalg.norm(finals[1] - finals[2])
    if fine == 0.0:
        raise IntegrationError("刻み半減で差が出ません。step を大きくしてください")
    ratio = float(coarse / fine)
    logger.debug("RK4 収束比: %.3f (差分 %.3e / %.3e)", ratio, coarse, fine)
    return ratio
