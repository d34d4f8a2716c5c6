"""Runtime switches: kernel backend and worker-thread cap.

``NLDID_DISABLE_JIT=1`` forces the pure-numpy kernels even when numba is
importable. ``NLDID_THREADS`` is the fallback for the CLI ``--threads`` flag.
"""

from __future__ import annotations

import os

from .errors import ConfigurationError

_TRUE = {"1", "true", "yes", "on"}

_threads = None


def jit_disabled() -> bool:
    return os.environ.get("NLDID_DISABLE_JIT", "").strip().lower() in _TRUE


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("NLDID_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1


def set_threads(n: int) -> int:
    """Cap internal parallelism at ``n`` workers; returns the effective cap."""
    global _threads
    if n < 1:
        raise ConfigurationError("threads must be >= 1")
    _threads = int(n)
    from . import _kernels

    _kernels.apply_thread_cap(_threads)
    return _threads
