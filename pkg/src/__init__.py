# 量子駆動シミュレーター
