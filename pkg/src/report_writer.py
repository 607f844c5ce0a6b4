"""結果出力モジュール

時系列は CSV（単位のコメント行、ヘッダー行、%.17g）、要約は JSON
（キーを整列）で書き出す。同じ入力からは同じバイト列を出力する。
"""
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

UNITS_LINE = "# units: energy [hbar*omega], time [1/omega]"

FLOAT_FORMAT = "%.17g"


def _plain(value: Any) -> Any:
    """JSON に書ける値へ変換（numpy のスカラー・配列を含む）"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return str(value)
    return value


class ReportWriter:
    """実験結果の書き出し"""

    def __init__(self, out_dir):
        """初期化

        Args:
            out_dir: 出力先ディレクトリ（なければ作成）
        """
        self.out_dir = Path(out_dir)
        self._written: list[Path] = []

    @property
    def written(self) -> list[Path]:
        """書き出したファイルの一覧"""
        return list(self._written)

    def _prepare(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def write_csv(self, df: pd.DataFrame, name: str) -> Path:
        """単位のコメント行つきで DataFrame を CSV に書く

        Args:
            df: 列順どおりの DataFrame
            name: ファイル名

        Returns:
            書き出したパス
        """
        path = self._prepare(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(UNITS_LINE + "\n")
            df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self._written.append(path)
        logger.info("%s に %d 行書き出しました", path, len(df))
        return path

    def write_json(self, summary: dict, name: str) -> Path:
        """キーを整列した JSON 要約を書く"""
        path = self._prepare(name)
        text = json.dumps(_plain(summary), sort_keys=True, indent=2, ensure_ascii=False)
        path.write_text(text + "\n", encoding="utf-8")
        self._written.append(path)
        logger.info("%s に要約を書き出しました", path)
        return path


def read_csv(path) -> pd.DataFrame:
    """write_csv で書いた CSV を読む（コメント行は読み飛ばす）"""
    return pd.read_csv(path, comment="#", float_precision="round_trip")
