"""Backend selection: compiled kernels when available, pure Python otherwise.

Set SPINWALK_BACKEND=py (or =cython) to force a backend; the default
prefers the compiled extension. Both backends are bit-identical
deterministic replays, so the choice affects speed only.
"""

from __future__ import annotations

import os

from . import _core_py

WALK_OK = _core_py.WALK_OK
WALK_OVERRUN = _core_py.WALK_OVERRUN
WALK_SIMULTANEOUS = _core_py.WALK_SIMULTANEOUS

_forced = os.environ.get("SPINWALK_BACKEND", "").strip().lower()

if _forced in ("py", "python"):
    _impl = _core_py
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _core_py
        BACKEND = "python"

evolve_from_log = _impl.evolve_from_log
walk_infty_zero = _impl.walk_infty_zero
tcp_evolve = _impl.tcp_evolve


def get_backends() -> dict:
    """Backend name -> kernel module, for benchmarks and equality tests."""
    out = {"python": _core_py}
    try:
        from . import _speedups

        out["cython"] = _speedups
    except ImportError:
        pass
    return out
