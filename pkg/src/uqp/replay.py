"""Shot-replay kernel selection.

The compiled ``_replay`` extension is used when it imported cleanly; otherwise,
or when ``UQP_PURE_PYTHON=1``, the numpy implementation runs instead.
"""

from __future__ import annotations

import os

from . import _replay_py
from ._replay_py import OP_CX, OP_CZ, OP_FETCH, OP_MEASURE, OP_RESET, OP_SWAP, OP_U1  # noqa: F401

python_replay_shots = _replay_py.replay_shots

try:
    if os.environ.get("UQP_PURE_PYTHON") == "1":
        raise ImportError("pure-Python mode requested")
    from ._replay import replay_shots as compiled_replay_shots
except ImportError:
    compiled_replay_shots = None

replay_shots = compiled_replay_shots or python_replay_shots
BACKEND = "compiled" if compiled_replay_shots is not None else "python"
