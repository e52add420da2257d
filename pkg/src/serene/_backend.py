"""Kernel backend selection.

The simulator's hot loops are plain functions over numpy arrays, compiled
with numba's ``@njit`` by default. Setting ``SERENE_NUMBA=0`` in the
environment (or numba failing to import) selects the interpreted fallback:
the same kernel code runs as ordinary Python. Both backends produce
bit-identical traces; ``serene bench`` measures the speed gap and checks
the equality.
"""

import os

__all__ = ["USING_NUMBA", "kernel"]


def _numba_wanted() -> bool:
    flag = os.environ.get("SERENE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


USING_NUMBA = False
if _numba_wanted():
    try:
        from numba import njit as _njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        USING_NUMBA = False


def kernel(fn):
    """Compile ``fn`` as a nopython kernel, or return it unchanged in fallback mode."""
    if USING_NUMBA:
        return _njit(cache=True)(fn)
    return fn
