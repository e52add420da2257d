"""Deterministic random stream and value hashing used by every simulation path.

SplitMix64 with explicit state held in a one-element uint64 array. The
compiled backend does native uint64 arithmetic; the interpreted fallback
does the same arithmetic with masked Python ints (numpy would emit scalar
overflow warnings otherwise). Both produce bit-identical streams, which is
what makes traces reproducible regardless of backend.

The same mixing function doubles as the stateless 64-bit hash used to
encode task result values.
"""

import numpy as np

from ._backend import USING_NUMBA, kernel

__all__ = [
    "U64",
    "new_state",
    "spawn_state",
    "next_u64",
    "random01",
    "randbelow",
    "uniform",
    "hash_u64",
]

U64 = np.uint64
_MASK = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def new_state(seed: int) -> np.ndarray:
    """Fresh stream state from a 64-bit seed."""
    return np.array([int(seed) & _MASK], dtype=np.uint64)


# --- compiled twin: native uint64 arithmetic, wraps modulo 2**64 ------------

_GOLD_U = U64(_GOLD)
_MIX1_U = U64(_MIX1)
_MIX2_U = U64(_MIX2)
_S30 = U64(30)
_S27 = U64(27)
_S31 = U64(31)
_S11 = U64(11)


def _next_u64_native(state):
    state[0] = state[0] + _GOLD_U
    z = state[0]
    z = (z ^ (z >> _S30)) * _MIX1_U
    z = (z ^ (z >> _S27)) * _MIX2_U
    return z ^ (z >> _S31)


def _hash_u64_native(x):
    z = x + _GOLD_U
    z = (z ^ (z >> _S30)) * _MIX1_U
    z = (z ^ (z >> _S27)) * _MIX2_U
    return z ^ (z >> _S31)


# --- interpreted twin: masked Python ints -----------------------------------


def _next_u64_py(state):
    s = (int(state[0]) + _GOLD) & _MASK
    state[0] = s
    z = ((s ^ (s >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return U64(z ^ (z >> 31))


def _hash_u64_py(x):
    z = (int(x) + _GOLD) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return U64(z ^ (z >> 31))


if USING_NUMBA:
    next_u64 = kernel(_next_u64_native)
    hash_u64 = kernel(_hash_u64_native)
else:
    next_u64 = _next_u64_py
    hash_u64 = _hash_u64_py


def _random01(state):
    """Double in [0, 1) with 53 random bits."""
    return (next_u64(state) >> _S11) * _INV53


random01 = kernel(_random01)


def _randbelow(state, n):
    """Integer in [0, n). Modulo draw; bias is ~2**-44 for the n used here."""
    return np.int64(next_u64(state) % U64(n))


randbelow = kernel(_randbelow)


def _uniform(state, lo, hi):
    return lo + (hi - lo) * random01(state)


uniform = kernel(_uniform)


def spawn_state(state: np.ndarray) -> np.ndarray:
    """Independent child stream, consuming one draw from ``state``."""
    return new_state(int(hash_u64(next_u64(state))))
