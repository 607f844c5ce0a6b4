# 物理計算の基盤
