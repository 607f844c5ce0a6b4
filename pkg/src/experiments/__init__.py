# JC 模型の計算例
