# tests/conftest.py
"""テスト共通のフィクスチャ（ルート直下のモジュールを import できるようにする）"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    """環境変数と出力先をテストごとに切り離す"""
    for name in ("GDFRACTAL_THREADS", "GDFRACTAL_LOSS_TOL_PRESET", "GDFRACTAL_DEBUG", "GDFRACTAL_OUTPUT_DIR",
                 "GDFRACTAL_ENV"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
