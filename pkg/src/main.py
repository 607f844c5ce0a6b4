"""量子駆動シミュレーター エントリーポイント

使い方:
    python src/main.py <experiment> --config <path> [--out <dir>]
    python src/main.py validate --config <path>
"""
import argparse
import json
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from app import Application  # noqa: E402
from config_loader import EXPERIMENTS, ConfigLoader  # noqa: E402
from physics.errors import IntegrationError, NumericalFloorError, ValidationError  # noqa: E402

logger = logging.getLogger("qdrive")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class UsageError(ValidationError):
    """コマンドライン引数の誤り"""


class _Parser(argparse.ArgumentParser):
    """引数の誤りを SystemExit ではなく UsageError で知らせるパーサー"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qdrive",
        description="量子駆動された二準位系の仕事・熱の収支と揺らぎの計算",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS + ("validate",), help="実行する実験、または validate")
    parser.add_argument("--config", required=True, help="設定ファイル（key = value 形式）")
    parser.add_argument("--out", default="results", help="出力先ディレクトリ（既定: results）")
    parser.add_argument("--verbose", action="store_true", help="DEBUG ログを表示")
    return parser


def validate(path) -> dict:
    """設定を検証し、既定値を埋めた内容を返す（計算はしない）"""
    return ConfigLoader(path).load().to_dict()


def main(argv=None) -> int:
    """メイン関数

    Returns:
        終了コード（0 成功、1 設定・入力・引数の誤り、2 数値計算の失敗）
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(parser.format_usage(), end="", file=sys.stderr)
        print(f"エラー: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.experiment == "validate":
            print(json.dumps(validate(args.config), sort_keys=True, indent=2, ensure_ascii=False))
            return EXIT_OK
        config = ConfigLoader(args.config).load(args.experiment)
        app = Application(config, args.out)
        summary = app.run()
    except ValidationError as e:
        print(f"エラー: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IntegrationError, NumericalFloorError) as e:
        print(f"数値計算エラー ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    print(app.summary_line(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
