"""Backend selection for the hot PDE kernels.

numba is used when importable unless ``HGTLAB_DISABLE_NUMBA`` is set to a
truthy value, in which case the pure-numpy implementations run instead.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}


def numba_disabled_by_env() -> bool:
    return os.environ.get("HGTLAB_DISABLE_NUMBA", "").strip().lower() not in _FALSY


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def default_backend() -> str:
    return "numba" if HAVE_NUMBA and not numba_disabled_by_env() else "numpy"
