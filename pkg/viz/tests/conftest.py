import shutil
from pathlib import Path

import pytest

DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture
def golden_dir():
    return DATA / "golden"


@pytest.fixture
def golden_copy(golden_dir, tmp_path):
    """A scratch copy of the golden run, safe to corrupt."""
    dst = tmp_path / "run"
    shutil.copytree(golden_dir, dst)
    return dst
