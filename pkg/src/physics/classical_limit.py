"""古典駆動極限

駆動系が自由発展し、系には期待値 ⟨B_α⟩_D(t) を通してのみ作用する近似。
有効ハミルトニアン H_CL,S(t) = H_S + Σ_α A_α⟨B_α⟩_D(t) と古典的な注入仕事率を扱う。
制御パラメータは ⟨B_α⟩_D(t) そのものとし、スカラー λ(t) は作らない。
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .composite_model import FactorizedCoupling, HilbertLayout, ensure_density, lift
from .dynamics import Trajectory
from .errors import LayoutError, ValidationError
from .tensor_algebra import (
    EigenSystem,
    as_matrix,
    commutator,
    dagger,
    ensure_hermitian,
    expectation,
    hermitian_eig,
)

logger = logging.getLogger(__name__)

# 期待値の虚部の許容値（相対）
IMAG_TOL = 1e-12

# 期待値を時刻ベクトルでまとめて評価するときのチャンク
TIME_CHUNK = 4096


@dataclass(frozen=True)
class ClassicalDriveSpec:
    """古典駆動の設定

    駆動系は他の自由度と無関係に e^{−iH_D t} で発展する。

    Attributes:
        h_d: 駆動系ハミルトニアン
        rho_d0: 駆動系の初期密度行列
        couplings: 駆動系–系結合 Σ B_α ⊗ A_α
        de_couplings: 駆動系–環境結合 Σ C_α ⊗ D_α（任意）
    """

    h_d: np.ndarray
    rho_d0: np.ndarray
    couplings: FactorizedCoupling
    de_couplings: Optional[FactorizedCoupling] = None

    def __post_init__(self):
        h_d = ensure_hermitian(self.h_d, "H_D")
        rho = ensure_density(self.rho_d0, "rho_D(0)")
        if rho.shape != h_d.shape:
            raise ValidationError(f"rho_D(0) の次元 {rho.shape} が H_D の次元 {h_d.shape} と一致しません")
        for name, coupling, slots in (
            ("couplings", self.couplings, ("D", "S")),
            ("de_couplings", self.de_couplings, ("D", "E")),
        ):
            if coupling is None:
                continue
            if (coupling.left_slot, coupling.right_slot) != slots:
                raise LayoutError(f"{name} のスロットは {slots} である必要があります")
            for b in coupling.left_factors:
                if b.shape != h_d.shape:
                    raise ValidationError(f"{name} の駆動系因子の次元 {b.shape} が H_D と一致しません")
        object.__setattr__(self, "h_d", h_d)
        object.__setattr__(self, "rho_d0", rho)

    @cached_property
    def drive_eig(self) -> EigenSystem:
        return hermitian_eig(self.h_d)

    @cached_property
    def _rho_eig(self) -> np.ndarray:
        v = self.drive_eig.vectors
        return dagger(v) @ self.rho_d0 @ v

    @property
    def system_dim(self) -> int:
        factors = self.couplings.right_factors
        if not factors:
            raise ValidationError("結合項がないため系の次元が決まりません")
        return factors[0].shape[0]

    def drive_state(self, t: float) -> np.ndarray:
        """自由発展した駆動系の状態 ρ_D(t)"""
        es = self.drive_eig
        u = np.exp(-1j * es.values * t)
        rho_t = (u[:, None] * self._rho_eig) * np.conj(u)[None, :]
        return es.vectors @ rho_t @ dagger(es.vectors)

    def mean_series(self, ops: Sequence[np.ndarray], times) -> np.ndarray:
        """Tr_D{ρ_D(t) X} を固有基底で時刻ベクトルごとに評価

        Returns:
            (演算子数, 時刻数) の複素配列
        """
        return self._evaluate(self._weights(ops), times)

    def _weights(self, ops: Sequence[np.ndarray]) -> list[np.ndarray]:
        v = self.drive_eig.vectors
        return [self._rho_eig * (dagger(v) @ as_matrix(op) @ v).T for op in ops]

    @cached_property
    def _mean_weights(self) -> list[np.ndarray]:
        return self._weights(self.couplings.left_factors)

    @cached_property
    def _rate_weights(self) -> list[np.ndarray]:
        return self._weights(self.rate_operators)

    def coupling_means(self, times) -> np.ndarray:
        """⟨B_α⟩_D(t)（複素のまま）"""
        return self._evaluate(self._mean_weights, times)

    def coupling_rates(self, times) -> np.ndarray:
        """∂_t⟨B_α⟩_D(t)（複素のまま）"""
        return self._evaluate(self._rate_weights, times)

    def _evaluate(self, weights: list[np.ndarray], times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((len(weights), len(times)), dtype=np.complex128)
        for start in range(0, len(times), TIME_CHUNK):
            stop = min(start + TIME_CHUNK, len(times))
            u = np.exp(-1j * np.outer(times[start:stop], self.drive_eig.values))
            uc = np.conj(u)
            for k, w in enumerate(weights):
                out[k, start:stop] = np.sum((u @ w) * uc, axis=1)
        return out

    @cached_property
    def rate_operators(self) -> list[np.ndarray]:
        """−i[B_α, H_D]（期待値が ∂_t⟨B_α⟩_D を与える）"""
        return [-1j * commutator(b, self.h_d) for b in self.couplings.left_factors]


def _real_values(values: np.ndarray, what: str) -> np.ndarray:
    if np.any(np.abs(values.imag) > IMAG_TOL * np.maximum(1.0, np.abs(values.real))):
        raise ValidationError(f"{what} が実数になりません。因子がエルミートか確認してください")
    return values.real


def drive_expectations(spec: ClassicalDriveSpec, t: float) -> np.ndarray:
    """⟨B_α⟩_D(t) の配列（エルミート因子なので実数）"""
    return _real_values(spec.coupling_means([t])[:, 0], "⟨B_α⟩_D")


def drive_expectation_rates(spec: ClassicalDriveSpec, t: float) -> np.ndarray:
    """∂_t⟨B_α⟩_D = −i Tr_D{ρ_D(t)[B_α, H_D]}"""
    return _real_values(spec.coupling_rates([t])[:, 0], "∂_t⟨B_α⟩_D")


def _system_part(h_s: np.ndarray, spec: ClassicalDriveSpec, means: np.ndarray) -> np.ndarray:
    h_cl = ensure_hermitian(h_s, "H_S").copy()
    if spec.couplings.terms and h_cl.shape != spec.couplings.right_factors[0].shape:
        raise ValidationError(f"H_S の次元 {h_cl.shape} が結合因子の次元と一致しません")
    for a, b_mean in zip(spec.couplings.right_factors, means):
        h_cl += b_mean * a
    return h_cl


def build_classical_hamiltonian(
    h_s, spec: ClassicalDriveSpec, t: float, se_layout: Optional[HilbertLayout] = None
) -> np.ndarray:
    """有効ハミルトニアン H_CL,S(t) = H_S + Σ_α A_α⟨B_α⟩_D(t)

    駆動系–環境結合があるときは S⊗E 上で Σ_α D_α⟨C_α⟩_D(t) を加えた行列を返す。

    Args:
        h_s: 系ハミルトニアン
        spec: 古典駆動の設定
        t: 時刻
        se_layout: 駆動系–環境結合を使うときの S⊗E レイアウト

    Returns:
        エルミート行列（S 上、または S⊗E 上）
    """
    h_cl = _system_part(as_matrix(h_s, "H_S"), spec, drive_expectations(spec, t))
    if spec.de_couplings is None or spec.de_couplings.is_empty:
        return h_cl
    if se_layout is None or se_layout.labels != ("S", "E"):
        raise LayoutError("駆動系–環境結合には S, E からなるレイアウトが必要です")
    c_means = _real_values(spec.mean_series(spec.de_couplings.left_factors, [t])[:, 0], "⟨C_α⟩_D")
    total = lift(h_cl, se_layout, "S")
    for d_op, c_mean in zip(spec.de_couplings.right_factors, c_means):
        total = total + c_mean * lift(d_op, se_layout, "E")
    return ensure_hermitian(total, "H_CL")


def classical_hamiltonian_provider(h_s, spec: ClassicalDriveSpec):
    """evolve_time_dependent に渡す H_CL,S(t) の関数を作る"""
    h_s = ensure_hermitian(h_s, "H_S")

    def provider(t: float) -> np.ndarray:
        return _system_part(h_s, spec, drive_expectations(spec, t))

    return provider


def classical_power_operator(spec: ClassicalDriveSpec, t: float) -> np.ndarray:
    """∂_t H_CL,S = Σ_α (∂_t⟨B_α⟩_D) A_α"""
    dim = spec.system_dim
    op = np.zeros((dim, dim), dtype=np.complex128)
    for a, rate in zip(spec.couplings.right_factors, drive_expectation_rates(spec, t)):
        op += rate * a
    return op


def classical_power_terms(
    rho_s, spec: ClassicalDriveSpec, h_s, t: float, diss: Optional[np.ndarray] = None
) -> tuple[float, float]:
    """古典的な注入仕事率の分解

    Args:
        rho_s: 系の密度行列
        spec: 古典駆動の設定
        h_s: 系ハミルトニアン
        t: 時刻
        diss: 系の散逸子の出力 D(ρ_S)（任意）

    Returns:
        (d⟨H_CL,S⟩/dt, 熱交換項 −Tr_S{D·H_CL,S})。和が注入仕事率
    """
    rho_s = as_matrix(rho_s, "rho_S")
    drive_term = float(expectation(rho_s, classical_power_operator(spec, t)).real)
    if diss is None:
        return drive_term, 0.0
    diss = as_matrix(diss, "diss")
    h_cl = _system_part(as_matrix(h_s, "H_S"), spec, drive_expectations(spec, t))
    exchange = float(expectation(diss, h_cl).real)
    return drive_term + exchange, -exchange


def classical_power(
    rho_s, spec: ClassicalDriveSpec, h_s, t: float, diss: Optional[np.ndarray] = None
) -> float:
    """古典駆動の注入仕事率（= Tr_S{ρ_S ∂_t H_CL,S}）"""
    internal, exchange = classical_power_terms(rho_s, spec, h_s, t, diss)
    return internal + exchange


def classical_power_series(traj: Trajectory, spec: ClassicalDriveSpec) -> np.ndarray:
    """古典軌道の全時刻での注入仕事率 Σ_α ∂_t⟨B_α⟩_D(t)·⟨A_α⟩_S(t)"""
    rates = _real_values(spec.coupling_rates(traj.times), "∂_t⟨B_α⟩_D")
    system_means = traj.expectations(spec.couplings.right_factors).real
    return np.sum(rates * system_means, axis=0)
