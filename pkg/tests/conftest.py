import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uqp import qir  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture
def bell_path() -> Path:
    return DATA / "bell.ll"


@pytest.fixture
def bell_text(bell_path) -> str:
    return bell_path.read_text()


@pytest.fixture
def bell_kernel(bell_text) -> qir.QuantumKernel:
    return qir.validate(qir.parse_qir(bell_text))
