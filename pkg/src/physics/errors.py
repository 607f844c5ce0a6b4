"""例外クラス定義"""


class QDriveError(Exception):
    """シミュレーター共通の基底例外"""


class ValidationError(QDriveError, ValueError):
    """入力検証エラー（非エルミート、非密度行列、次元不一致など）"""


class LayoutError(ValidationError):
    """ヒルベルト空間レイアウトのエラー（未知のスロット、次元の積の不一致）"""


class UnsupportedModelError(ValidationError):
    """計算対象外のモデル（縮退したH_S、TMA中の散逸など）"""


class IntegrationError(QDriveError, RuntimeError):
    """時間発展の数値積分が許容範囲を外れた"""


class ConvergenceError(IntegrationError):
    """t_max までに定常状態へ到達しなかった"""


class NumericalFloorError(QDriveError, ArithmeticError):
    """対数を取れないほど小さい偏差（数値誤差の床）"""
