import os
import sys

import pytest

# 让本地包可导入
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)

from src.tensor_core import RngStream  # noqa: E402


@pytest.fixture
def rng():
    return RngStream(1234)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    """把 GRADFLOW_OUT 指向临时目录"""
    target = tmp_path / "out"
    monkeypatch.setenv("GRADFLOW_OUT", str(target))
    return target
