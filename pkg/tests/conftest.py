"""pytest 共通フィクスチャ"""
import sys
from pathlib import Path

import numpy as np
import pytest

# srcディレクトリをパスに追加
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))


@pytest.fixture
def rng():
    """固定シードの乱数生成器"""
    return np.random.default_rng(20240917)


@pytest.fixture
def qubit_hamiltonian():
    """(ω/2)σ_z（ω = 1）"""
    return np.diag([-0.5, 0.5]).astype(np.complex128)


@pytest.fixture
def decay_jump():
    """振幅減衰 |g⟩⟨e| と γ = 0.3"""
    gamma = 0.3
    return gamma, np.sqrt(gamma) * np.array([[0, 1], [0, 0]], dtype=np.complex128)


@pytest.fixture
def fock_params():
    """g = 0.5、|0⟩⊗|e⟩ 用の最小打ち切り"""
    from experiments.jaynes_cummings import JCParams
    return JCParams(g=0.5, n_trunc=2)


@pytest.fixture
def write_config(tmp_path):
    """設定ファイルを書き出すヘルパー"""
    def _write(text: str, name: str = "experiment.cfg") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return _write
