"""密な複素行列カーネル

テンソル積・部分トレース・交換子・エルミート固有値分解・行列関数を提供する。
演算子も密度行列もすべて complex128 の正方 ndarray で扱う。
単位系は ħ = 1、エネルギーは ħω、時間は 1/ω 単位。
"""
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import LayoutError, ValidationError

# エルミート判定の絶対許容誤差（成分ごと）
HERMITIAN_TOL = 1e-12


class SlotLayout(Protocol):
    """部分トレースに必要なレイアウト情報"""

    @property
    def labels(self) -> tuple[str, ...]: ...

    @property
    def dims(self) -> tuple[int, ...]: ...


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """正方複素行列に変換して検証する

    Args:
        m: 配列様の入力
        name: エラーメッセージ用の名前

    Returns:
        complex128 の正方行列

    Raises:
        ValidationError: 正方でない、または空の場合
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValidationError(f"{name} は正方行列である必要があります: shape={arr.shape}")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    """エルミート共役"""
    return np.conj(m).T


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """max|M − M†| ≤ tol かどうか"""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def ensure_hermitian(m, name: str = "matrix", tol: float = HERMITIAN_TOL) -> np.ndarray:
    """エルミート行列であることを検証して返す"""
    arr = as_matrix(m, name)
    if not is_hermitian(arr, tol):
        residue = float(np.max(np.abs(arr - dagger(arr))))
        raise ValidationError(f"{name} がエルミートではありません (max|M-M†|={residue:.3e})")
    return arr


def ensure_same_dim(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    """2つの行列の次元一致を検証"""
    if a.shape != b.shape:
        raise ValidationError(f"{what} の次元が一致しません: {a.shape} vs {b.shape}")


def kron(a, b) -> np.ndarray:
    """クロネッカー積（左因子が遅く変わる添字）"""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def kron_all(factors: Iterable) -> np.ndarray:
    """左から順にクロネッカー積を取る"""
    result = np.ones((1, 1), dtype=np.complex128)
    for f in factors:
        result = np.kron(result, as_matrix(f, "factor"))
    return result


def commutator(a, b) -> np.ndarray:
    """[a, b] = ab − ba"""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    ensure_same_dim(a, b, "commutator")
    return a @ b - b @ a


def partial_trace(m, layout: SlotLayout, keep: Iterable[str]) -> np.ndarray:
    """指定スロットを残して残りをトレースアウトする

    Args:
        m: 全空間上の行列
        layout: スロットラベルと次元（大域スロット順）
        keep: 残すスロットラベルの集合

    Returns:
        残したスロットのみに作用する行列（大域スロット順を保持）

    Raises:
        LayoutError: 次元の積が一致しない、未知/空のスロット指定
    """
    m = as_matrix(m, "m")
    labels = tuple(layout.labels)
    dims = [int(d) for d in layout.dims]
    total = int(np.prod(dims))
    if m.shape[0] != total:
        raise LayoutError(f"行列の次元 {m.shape[0]} がレイアウトの次元 {total} と一致しません")

    keep = set(keep)
    if not keep:
        raise LayoutError("残すスロットが指定されていません")
    unknown = keep - set(labels)
    if unknown:
        raise LayoutError(f"未知のスロット: {sorted(unknown)}")

    n = len(dims)
    kept = [i for i, lab in enumerate(labels) if lab in keep]
    traced = [i for i, lab in enumerate(labels) if lab not in keep]
    if not traced:
        return m.copy()

    d_keep = int(np.prod([dims[i] for i in kept]))
    d_trace = int(np.prod([dims[i] for i in traced]))

    # 行/列の添字を分解し、トレースする軸を先頭へ並べ替えてから縮約
    tensor = m.reshape(dims + dims)
    order = traced + [n + i for i in traced] + kept + [n + i for i in kept]
    tensor = tensor.transpose(order).reshape(d_trace, d_trace, d_keep, d_keep)
    return np.trace(tensor, axis1=0, axis2=1)


@dataclass(frozen=True)
class EigenSystem:
    """エルミート行列の固有系（固有値は昇順、固有ベクトルは列）"""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def reconstruct(self) -> np.ndarray:
        """V·diag(λ)·V† を返す"""
        return (self.vectors * self.values) @ dagger(self.vectors)

    def apply(self, fn) -> np.ndarray:
        """スペクトル関数 f(H) = V·diag(f(λ))·V†"""
        return (self.vectors * fn(self.values)) @ dagger(self.vectors)


def hermitian_eig(h) -> EigenSystem:
    """エルミート固有値分解

    Raises:
        ValidationError: エルミートでない入力
    """
    h = ensure_hermitian(h, "h")
    # 許容誤差内の反エルミート成分を落としてから LAPACK に渡す
    values, vectors = np.linalg.eigh(0.5 * (h + dagger(h)))
    return EigenSystem(values=values, vectors=vectors)


def matrix_function(h, kind: str, value: float = 0.0, eig: EigenSystem | None = None) -> np.ndarray:
    """エルミート行列の行列関数

    Args:
        h: エルミート行列
        kind: "unitary_exp" (e^{−iHt}, value=t), "gibbs" (e^{−βH}, value=β),
            "log" (正定値行列の自然対数)
        value: 時間 t または逆温度 β
        eig: 計算済みの固有系（省略時は h から計算）

    Returns:
        行列関数の値
    """
    es = eig if eig is not None else hermitian_eig(h)
    if kind == "unitary_exp":
        return es.apply(lambda lam: np.exp(-1j * lam * value))
    if kind == "gibbs":
        # 指数のオーバーフローを避けるため最小固有値でシフトしてから戻す
        shift = float(es.values[0]) if es.dim else 0.0
        return np.exp(-value * shift) * es.apply(lambda lam: np.exp(-value * (lam - shift)))
    if kind == "log":
        if es.values[0] <= 0.0:
            raise ValidationError(f"log は正定値行列のみ対応します (最小固有値 {es.values[0]:.3e})")
        return es.apply(np.log)
    raise ValidationError(f"未知の行列関数: {kind}")


def unitary_exp(h, t: float) -> np.ndarray:
    """e^{−iHt}"""
    return matrix_function(h, "unitary_exp", t)


def gibbs_exp(h, beta: float) -> np.ndarray:
    """e^{−βH}"""
    return matrix_function(h, "gibbs", beta)


def expectation(rho: np.ndarray, op: np.ndarray) -> complex:
    """Tr{ρ X}"""
    return complex(np.einsum("ij,ji->", rho, op))


def basis_projector(dim: int, index: int) -> np.ndarray:
    """|index⟩⟨index|"""
    p = np.zeros((dim, dim), dtype=np.complex128)
    p[index, index] = 1.0
    return p


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """乱数エルミート行列（検証用）"""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + dagger(a))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """乱数密度行列（検証用）"""
    k = dim if rank is None else rank
    a = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = a @ dagger(a)
    return rho / np.trace(rho).real


def min_eigenvalue(m: np.ndarray) -> float:
    """エルミート行列の最小固有値"""
    return float(np.linalg.eigvalsh(0.5 * (m + dagger(m)))[0])


def dims_product(dims: Sequence[int]) -> int:
    return int(np.prod([int(d) for d in dims]))
