"""実験設定ファイル読み込みモジュール

1行1代入の `key = value` 形式。`#` 以降はコメント、空行は無視する。
値は Python のリテラル（整数、実数、複素数、リスト、引用符つき文字列）として
解釈し、解釈できない裸の単語は文字列として扱う。
"""
import ast
import logging
import math
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Optional

from experiments.jaynes_cummings import default_truncation
from physics.errors import ValidationError

logger = logging.getLogger(__name__)

EXPERIMENTS = ("jc-unitary", "jc-dissipative", "classical-compare", "bk-identity", "bk-sweep")

PROPAGATIONS = ("closed_form", "quantum", "classical")

# 実験ごとの必須項目
REQUIRED_FIELDS = {
    "jc-unitary": ("g",),
    "jc-dissipative": ("g", "theta"),
    "classical-compare": ("g", "alpha"),
    "bk-identity": ("g",),
    "bk-sweep": ("g",),
}

DEFAULT_T_MAX = {"jc-dissipative": 100.0}


class ConfigError(ValidationError):
    """設定ファイルの誤り

    Attributes:
        field: 問題のある項目名（行全体の誤りでは None）
        line: 行番号（ファイル由来でなければ None）
    """

    def __init__(self, field: Optional[str], message: str, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = f"{line}行目: " if line is not None else ""
        prefix = f"{field}: " if field else ""
        super().__init__(f"{where}{prefix}{message}")


@dataclass(frozen=True)
class ExperimentConfig:
    """解決済みの実験設定（既定値を埋めたもの）"""

    experiment: str
    g: float
    theta: float = 0.2
    omega: float = 1.0
    alpha: Optional[complex] = None
    fock: Optional[int] = None
    beta: float = 1.0
    n_trunc: Optional[int] = None
    t_max: float = 20.0
    step: float = 1e-3
    stride: int = 1
    nbar: Any = None
    workers: int = 1
    propagation: str = "closed_form"

    @property
    def nbar_list(self) -> list[float]:
        return [float(v) for v in self.nbar] if isinstance(self.nbar, (list, tuple)) else [float(self.nbar)]

    def to_dict(self) -> dict:
        """出力用の辞書（複素数は文字列にする）"""
        out = asdict(self)
        if isinstance(out["alpha"], complex):
            a = out["alpha"]
            out["alpha"] = a.real if a.imag == 0 else str(a)
        if isinstance(out["nbar"], tuple):
            out["nbar"] = list(out["nbar"])
        return out


KNOWN_KEYS = {f.name for f in fields(ExperimentConfig)}

_LINE_PATTERN = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def _strip_comment(text: str) -> str:
    # 引用符の外にある最初の # からを落とす
    quote = None
    for i, ch in enumerate(text):
        if quote:
            if ch == quote:
                quote = None
        elif ch in ("'", '"'):
            quote = ch
        elif ch == "#":
            return text[:i]
    return text


def parse_value(text: str) -> Any:
    """値の文字列をリテラルとして解釈（だめなら文字列のまま）"""
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_text(text: str) -> dict[str, tuple[Any, int]]:
    """設定テキストを {key: (value, 行番号)} に分解する

    Raises:
        ConfigError: 書式の誤り、キーの重複、空の値
    """
    values: dict[str, tuple[Any, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        match = _LINE_PATTERN.match(line)
        if not match:
            raise ConfigError(None, f"`key = value` の形式ではありません: {raw.strip()!r}", lineno)
        key, value = match.groups()
        if key in values:
            raise ConfigError(key, f"キーが重複しています（最初は {values[key][1]} 行目）", lineno)
        if value == "":
            raise ConfigError(key, "値がありません", lineno)
        values[key] = (parse_value(value), lineno)
    return values


def _number(key: str, value: Any, line: Optional[int], kind=float) -> Any:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"数値である必要があります: {value!r}", line)
    if kind is int:
        if int(value) != value:
            raise ConfigError(key, f"整数である必要があります: {value!r}", line)
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(key, f"有限の値である必要があります: {value!r}", line)
    return value


def _positive(key: str, value: float, line: Optional[int]) -> None:
    if value <= 0:
        raise ConfigError(key, f"正の値である必要があります: {value}", line)


def resolve_config(experiment: str, raw: dict[str, tuple[Any, int]]) -> ExperimentConfig:
    """生の値を検証して既定値を埋める

    Args:
        experiment: 実験名（raw に experiment があれば一致を確認する）
        raw: parse_text の結果

    Raises:
        ConfigError: 未知のキー、必須項目の欠落、範囲外の値
    """
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        key = unknown[0]
        raise ConfigError(key, "未知のキーです", raw[key][1])

    if "experiment" in raw:
        named, line = raw["experiment"]
        if experiment is not None and named != experiment:
            raise ConfigError("experiment", f"ファイルの {named!r} がコマンドの {experiment!r} と一致しません", line)
        experiment = named
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"{EXPERIMENTS} のいずれかを指定してください: {experiment!r}")

    for key in REQUIRED_FIELDS[experiment]:
        if key not in raw:
            raise ConfigError(key, f"{experiment} では必須です")

    def get(key, default=None):
        return raw[key] if key in raw else (default, None)

    values: dict[str, Any] = {"experiment": experiment}
    for key in ("g", "theta", "omega", "t_max", "step", "beta"):
        if key in raw:
            value, line = raw[key]
            values[key] = _number(key, value, line)
            _positive(key, values[key], line)
    values.setdefault("t_max", DEFAULT_T_MAX.get(experiment, 20.0))

    for key in ("stride", "workers"):
        if key in raw:
            value, line = raw[key]
            values[key] = _number(key, value, line, int)
            if values[key] < 1:
                raise ConfigError(key, f"1以上の整数である必要があります: {value}", line)

    alpha, alpha_line = get("alpha")
    if alpha is not None:
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float, complex)):
            raise ConfigError("alpha", f"数値である必要があります: {alpha!r}", alpha_line)
        values["alpha"] = complex(alpha)
    fock, fock_line = get("fock")
    if fock is not None:
        values["fock"] = _number("fock", fock, fock_line, int)
        if values["fock"] < 0:
            raise ConfigError("fock", f"非負の整数である必要があります: {fock}", fock_line)
    if "alpha" in values and "fock" in values:
        raise ConfigError("alpha", "alpha と fock は同時に指定できません", alpha_line)
    if experiment == "jc-dissipative" and "alpha" in values:
        raise ConfigError("alpha", "jc-dissipative はフォック状態のみ対応します", alpha_line)

    nbar, nbar_line = get("nbar")
    if nbar is None:
        nbar = [4, 16, 64, 256] if experiment == "bk-sweep" else 16
    entries = nbar if isinstance(nbar, (list, tuple)) else [nbar]
    entries = [_number("nbar", v, nbar_line) for v in entries]
    if any(v < 1 for v in entries):
        raise ConfigError("nbar", f"各要素は1以上である必要があります: {nbar}", nbar_line)
    if experiment == "bk-sweep":
        values["nbar"] = tuple(entries)
    elif experiment == "bk-identity":
        if len(entries) != 1:
            raise ConfigError("nbar", "bk-identity では1つの値を指定してください", nbar_line)
        values["nbar"] = entries[0]

    propagation, prop_line = get("propagation", "closed_form")
    if propagation not in PROPAGATIONS:
        raise ConfigError("propagation", f"{PROPAGATIONS} のいずれかを指定してください: {propagation!r}", prop_line)
    values["propagation"] = propagation

    if experiment in ("jc-unitary", "jc-dissipative") and "alpha" not in values:
        values.setdefault("fock", 0)

    n_trunc, n_line = get("n_trunc")
    if n_trunc is not None:
        values["n_trunc"] = _number("n_trunc", n_trunc, n_line, int)
        if values["n_trunc"] < 2:
            raise ConfigError("n_trunc", f"2以上である必要があります: {n_trunc}", n_line)
        if values.get("fock") is not None and values["fock"] >= values["n_trunc"]:
            raise ConfigError("fock", f"n_trunc={values['n_trunc']} 未満である必要があります", fock_line)
    elif "alpha" in values:
        values["n_trunc"] = default_truncation(abs(values["alpha"]) ** 2)
    elif values.get("fock") is not None:
        values["n_trunc"] = values["fock"] + 2
    elif experiment == "bk-identity":
        values["n_trunc"] = default_truncation(values["nbar"])

    if values.get("step", 1e-3) > values["t_max"] and experiment in ("jc-unitary", "jc-dissipative", "classical-compare"):
        raise ConfigError("step", f"t_max={values['t_max']} 以下である必要があります")

    config = ExperimentConfig(**values)
    logger.debug("設定を解決しました: %s", config)
    return config


class ConfigLoader:
    """実験設定ファイルの読み込み"""

    def __init__(self, path):
        """初期化

        Args:
            path: 設定ファイルのパス
        """
        self.path = Path(path)
        self._raw: Optional[dict[str, tuple[Any, int]]] = None

    @property
    def raw(self) -> dict[str, tuple[Any, int]]:
        """読み込み済みの {key: (value, 行番号)}"""
        if self._raw is None:
            self._raw = self.read()
        return self._raw

    def read(self) -> dict[str, tuple[Any, int]]:
        if not self.path.is_file():
            raise ConfigError(None, f"設定ファイルが見つかりません: {self.path}")
        return parse_text(self.path.read_text(encoding="utf-8"))

    def load(self, experiment: Optional[str] = None) -> ExperimentConfig:
        """検証済みの設定を返す（experiment 省略時はファイルの experiment キー）"""
        return resolve_config(experiment, self.raw)
