"""複合系モデル

ヒルベルト空間レイアウト、演算子の全空間へのリフト、
駆動系 D・系 S・環境 E からなる6項ハミルトニアンの組み立てを扱う。
スロット順は常に D ⊗ S ⊗ E。
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import LayoutError, ValidationError
from .tensor_algebra import (
    as_matrix,
    dagger,
    ensure_hermitian,
    kron_all,
    min_eigenvalue,
    random_density,
    random_hermitian,
)

# 大域スロット順
SLOT_ORDER = ("D", "S", "E")

# 密度行列の正値性判定の許容誤差
POSITIVITY_TOL = 1e-10

# 明示的な環境スロットの上限次元
MAX_ENV_DIM = 8


@dataclass(frozen=True)
class HilbertLayout:
    """順序付きスロットと次元

    Attributes:
        labels: スロットラベル（D, S, E のうち大域順に並んだもの）
        dims: 各スロットの次元
    """

    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        dims = tuple(int(d) for d in self.dims)
        if len(labels) != len(dims) or not labels:
            raise LayoutError("ラベルと次元の数が一致しません")
        if len(set(labels)) != len(labels):
            raise LayoutError(f"スロットラベルが重複しています: {labels}")
        unknown = [lab for lab in labels if lab not in SLOT_ORDER]
        if unknown:
            raise LayoutError(f"未知のスロット: {unknown}")
        if list(labels) != sorted(labels, key=SLOT_ORDER.index):
            raise LayoutError(f"スロットは D, S, E の順に並べてください: {labels}")
        if any(d < 1 for d in dims):
            raise LayoutError(f"次元は正の整数である必要があります: {dims}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def from_dims(cls, d: int, s: int, e: Optional[int] = None) -> "HilbertLayout":
        """D, S（と任意で E）の次元からレイアウトを作成"""
        if e is None:
            return cls(("D", "S"), (d, s))
        return cls(("D", "S", "E"), (d, s, e))

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def has_environment(self) -> bool:
        return "E" in self.labels

    def dim_of(self, slot: str) -> int:
        """スロットの次元"""
        return self.dims[self.index_of(slot)]

    def index_of(self, slot: str) -> int:
        if slot not in self.labels:
            raise LayoutError(f"レイアウトにスロット {slot!r} がありません: {self.labels}")
        return self.labels.index(slot)

    def without(self, slot: str) -> "HilbertLayout":
        """指定スロットを除いたレイアウト"""
        i = self.index_of(slot)
        return HilbertLayout(
            self.labels[:i] + self.labels[i + 1:],
            self.dims[:i] + self.dims[i + 1:],
        )


def lift(op, layout: HilbertLayout, slot: str) -> np.ndarray:
    """単一スロットの演算子を全空間へ埋め込む（他スロットは恒等）

    Args:
        op: スロット上の演算子
        layout: レイアウト
        slot: 作用させるスロット

    Returns:
        全空間上の演算子
    """
    op = as_matrix(op, "op")
    d = layout.dim_of(slot)
    if op.shape[0] != d:
        raise LayoutError(f"演算子の次元 {op.shape[0]} がスロット {slot} の次元 {d} と一致しません")
    factors = [op if lab == slot else np.eye(dim) for lab, dim in zip(layout.labels, layout.dims)]
    return kron_all(factors)


def lift_pair(left, right, layout: HilbertLayout, left_slot: str, right_slot: str) -> np.ndarray:
    """2スロットにまたがる積演算子 left ⊗ right を全空間へ埋め込む"""
    if left_slot == right_slot:
        raise LayoutError("結合の左右は異なるスロットである必要があります")
    left = as_matrix(left, "left")
    right = as_matrix(right, "right")
    ops = {left_slot: left, right_slot: right}
    for slot in ops:
        layout.index_of(slot)
    factors = []
    for lab, dim in zip(layout.labels, layout.dims):
        if lab in ops:
            if ops[lab].shape[0] != dim:
                raise LayoutError(f"スロット {lab} の次元 {dim} と因子の次元 {ops[lab].shape[0]} が一致しません")
            factors.append(ops[lab])
        else:
            factors.append(np.eye(dim))
    return kron_all(factors)


@dataclass(frozen=True)
class FactorizedCoupling:
    """エルミート因子対の和 Σ_α B_α ⊗ A_α で表した結合

    Attributes:
        terms: (B_α, A_α) の組。B_α は left_slot、A_α は right_slot に作用する
        left_slot: 左因子のスロット
        right_slot: 右因子のスロット
    """

    terms: tuple[tuple[np.ndarray, np.ndarray], ...]
    left_slot: str
    right_slot: str

    def __post_init__(self):
        if self.left_slot not in SLOT_ORDER or self.right_slot not in SLOT_ORDER:
            raise LayoutError(f"未知のスロット: {self.left_slot}, {self.right_slot}")
        if SLOT_ORDER.index(self.left_slot) >= SLOT_ORDER.index(self.right_slot):
            raise LayoutError("左因子のスロットは大域順で右因子より前である必要があります")
        checked = []
        for k, (b, a) in enumerate(self.terms):
            b = ensure_hermitian(b, f"{self.left_slot}{self.right_slot} 結合の左因子[{k}]")
            a = ensure_hermitian(a, f"{self.left_slot}{self.right_slot} 結合の右因子[{k}]")
            if k and (b.shape != checked[0][0].shape or a.shape != checked[0][1].shape):
                raise ValidationError("結合項の因子次元が揃っていません")
            checked.append((b, a))
        object.__setattr__(self, "terms", tuple(checked))

    @classmethod
    def empty(cls, left_slot: str, right_slot: str) -> "FactorizedCoupling":
        return cls((), left_slot, right_slot)

    @property
    def is_empty(self) -> bool:
        return len(self.terms) == 0

    @property
    def left_factors(self) -> list[np.ndarray]:
        return [b for b, _ in self.terms]

    @property
    def right_factors(self) -> list[np.ndarray]:
        return [a for _, a in self.terms]

    def assemble(self, layout: HilbertLayout) -> np.ndarray:
        """全空間上の Σ_α B_α ⊗ A_α"""
        total = np.zeros((layout.total_dim, layout.total_dim), dtype=np.complex128)
        for b, a in self.terms:
            total += lift_pair(b, a, layout, self.left_slot, self.right_slot)
        return total

    def scaled(self, factor: float) -> "FactorizedCoupling":
        return FactorizedCoupling(
            tuple((b, factor * a) for b, a in self.terms), self.left_slot, self.right_slot
        )


@dataclass(frozen=True)
class CompositeHamiltonian:
    """6項ハミルトニアン H_S + H_D + H_E + H_SD + H_SE + H_DE

    局所項は行列、結合項は因子分解形で保持する。
    h_E, h_SE, h_DE は省略可能（S–D の2体モード）。
    """

    h_s: np.ndarray
    h_d: np.ndarray
    h_sd: FactorizedCoupling
    h_e: Optional[np.ndarray] = None
    h_se: Optional[FactorizedCoupling] = None
    h_de: Optional[FactorizedCoupling] = None

    def __post_init__(self):
        object.__setattr__(self, "h_s", ensure_hermitian(self.h_s, "H_S"))
        object.__setattr__(self, "h_d", ensure_hermitian(self.h_d, "H_D"))
        if self.h_e is not None:
            object.__setattr__(self, "h_e", ensure_hermitian(self.h_e, "H_E"))
        self._check_slots(self.h_sd, "D", "S")
        if self.h_se is not None:
            self._check_slots(self.h_se, "S", "E")
        if self.h_de is not None:
            self._check_slots(self.h_de, "D", "E")
        self._check_factor_dims()

    @staticmethod
    def _check_slots(coupling: FactorizedCoupling, left: str, right: str) -> None:
        if (coupling.left_slot, coupling.right_slot) != (left, right):
            raise LayoutError(
                f"結合のスロットが不正です: 期待 {left}{right}, 実際 {coupling.left_slot}{coupling.right_slot}"
            )

    def _check_factor_dims(self) -> None:
        dims = self.local_dims
        for coupling in (self.h_sd, self.h_se, self.h_de):
            if coupling is None:
                continue
            for b, a in coupling.terms:
                for slot, m in ((coupling.left_slot, b), (coupling.right_slot, a)):
                    if slot in dims and m.shape[0] != dims[slot]:
                        raise LayoutError(
                            f"結合因子の次元 {m.shape[0]} がスロット {slot} の次元 {dims[slot]} と一致しません"
                        )

    @property
    def local_dims(self) -> dict[str, int]:
        dims = {"D": self.h_d.shape[0], "S": self.h_s.shape[0]}
        if self.h_e is not None:
            dims["E"] = self.h_e.shape[0]
        return dims

    @property
    def is_tripartite(self) -> bool:
        return self.h_e is not None

    def default_layout(self) -> HilbertLayout:
        """局所項の次元から決まるレイアウト"""
        dims = self.local_dims
        return HilbertLayout.from_dims(dims["D"], dims["S"], dims.get("E"))

    def check_layout(self, layout: HilbertLayout) -> None:
        """レイアウトと局所項の次元が一致するか検証"""
        for slot, dim in self.local_dims.items():
            if layout.dim_of(slot) != dim:
                raise LayoutError(f"スロット {slot} の次元がモデル ({dim}) とレイアウト ({layout.dim_of(slot)}) で異なります")
        if layout.has_environment and self.h_e is None:
            raise LayoutError("レイアウトに E がありますがモデルに H_E がありません")
        if not layout.has_environment:
            for name, coupling in (("H_SE", self.h_se), ("H_DE", self.h_de)):
                if coupling is not None and not coupling.is_empty:
                    raise LayoutError(f"E のないレイアウトでは {name} を使えません")

    def part(self, name: str, layout: HilbertLayout) -> np.ndarray:
        """個別項を全空間上の行列として返す（存在しない項はゼロ）

        Args:
            name: "S", "D", "E", "SD", "SE", "DE" のいずれか
            layout: レイアウト
        """
        self.check_layout(layout)
        dim = layout.total_dim
        if name == "S":
            return lift(self.h_s, layout, "S")
        if name == "D":
            return lift(self.h_d, layout, "D")
        if name == "E":
            if self.h_e is None:
                return np.zeros((dim, dim), dtype=np.complex128)
            return lift(self.h_e, layout, "E")
        couplings = {"SD": self.h_sd, "SE": self.h_se, "DE": self.h_de}
        if name not in couplings:
            raise ValidationError(f"未知のハミルトニアン項: {name}")
        coupling = couplings[name]
        if coupling is None or coupling.is_empty:
            return np.zeros((dim, dim), dtype=np.complex128)
        return coupling.assemble(layout)

    def with_coupling(self, **changes) -> "CompositeHamiltonian":
        """一部の項を差し替えた新しいモデル"""
        fields = {
            "h_s": self.h_s, "h_d": self.h_d, "h_sd": self.h_sd,
            "h_e": self.h_e, "h_se": self.h_se, "h_de": self.h_de,
        }
        fields.update(changes)
        return CompositeHamiltonian(**fields)


def assemble_total(ch: CompositeHamiltonian, layout: HilbertLayout) -> np.ndarray:
    """6項の和としての全ハミルトニアン"""
    ch.check_layout(layout)
    names = ("S", "D", "E", "SD", "SE", "DE") if layout.has_environment else ("S", "D", "SD")
    total = sum(ch.part(name, layout) for name in names)
    return ensure_hermitian(total, "H_total")


def ensure_density(rho, name: str = "rho", tol: float = POSITIVITY_TOL) -> np.ndarray:
    """密度行列（エルミート・単位トレース・半正定値）であることを検証"""
    rho = ensure_hermitian(rho, name)
    trace = np.trace(rho)
    if abs(trace - 1.0) > tol:
        raise ValidationError(f"{name} のトレースが1ではありません: {trace.real:.12g}")
    lam = min_eigenvalue(rho)
    if lam < -tol:
        raise ValidationError(f"{name} が半正定値ではありません (最小固有値 {lam:.3e})")
    return rho


def product_state(factors: Sequence, layout: HilbertLayout) -> np.ndarray:
    """スロット順の直積密度行列

    Args:
        factors: 各スロットの密度行列（レイアウトのスロット順）
        layout: レイアウト

    Returns:
        全空間上の密度行列
    """
    if len(factors) != len(layout.dims):
        raise LayoutError(f"因子数 {len(factors)} がスロット数 {len(layout.dims)} と一致しません")
    checked = []
    for lab, dim, f in zip(layout.labels, layout.dims, factors):
        rho = ensure_density(f, f"rho_{lab}")
        if rho.shape[0] != dim:
            raise LayoutError(f"rho_{lab} の次元 {rho.shape[0]} がスロット次元 {dim} と一致しません")
        checked.append(rho)
    return kron_all(checked)


def pure_density(vector) -> np.ndarray:
    """状態ベクトルから純粋状態の密度行列 |ψ⟩⟨ψ| を作る"""
    v = np.asarray(vector, dtype=np.complex128).reshape(-1, 1)
    return v @ dagger(v)


@dataclass
class RandomComposite:
    """乱数で作った3体複合系（恒等式の検証用）"""

    hamiltonian: CompositeHamiltonian
    layout: HilbertLayout
    rho: np.ndarray = field(repr=False)


def random_composite(
    rng: np.random.Generator, d: int = 3, s: int = 2, e: int = 2, n_terms: int = 2
) -> RandomComposite:
    """乱数エルミート項と乱数密度行列からなる D⊗S⊗E 系を作成"""
    if e > MAX_ENV_DIM:
        raise ValidationError(f"環境の次元は {MAX_ENV_DIM} 以下にしてください: {e}")

    def coupling(left, right, dl, dr):
        terms = tuple(
            (random_hermitian(dl, rng), random_hermitian(dr, rng, scale=0.5)) for _ in range(n_terms)
        )
        return FactorizedCoupling(terms, left, right)

    ch = CompositeHamiltonian(
        h_s=random_hermitian(s, rng),
        h_d=random_hermitian(d, rng),
        h_e=random_hermitian(e, rng),
        h_sd=coupling("D", "S", d, s),
        h_se=coupling("S", "E", s, e),
        h_de=coupling("D", "E", d, e),
    )
    layout = HilbertLayout.from_dims(d, s, e)
    return RandomComposite(ch, layout, random_density(layout.total_dim, rng))
