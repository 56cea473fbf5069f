"""Pure numpy walk kernels; bit-for-bit twins of ``_ckernels.pyx``.

Random stream layout (shared by both backends):

    key_j      = mix64(seed + (j + 1) * GAMMA)          sample j (global index)
    word_{j,k} = mix64(key_j + (k + 1) * GAMMA)         k-th 64-bit word of sample j
    step_{j,i} = +1 if bit (i % 64) of word_{j, i // 64} is set else -1

with all arithmetic mod 2**64 and ``mix64`` the SplitMix64 finaliser.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_G = np.uint64(GAMMA)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)


def mix64_int(z: int) -> int:
    """SplitMix64 finaliser on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _offset(k: int) -> np.uint64:
    return np.uint64((k * GAMMA) & MASK64)


def _keys(seed: int, start: int, count: int) -> np.ndarray:
    j = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return _mix64(np.uint64(seed & MASK64) + j * _G)


def _words(seed: int, start: int, count: int, nwords: int) -> np.ndarray:
    keys = _keys(seed, start, count)
    k = np.arange(1, nwords + 1, dtype=np.uint64)
    return _mix64(keys[:, None] + k[None, :] * _G)


def walk_sums(seed: int, start: int, count: int, n: int) -> np.ndarray:
    """Partial sums ``S_0..S_n`` for samples ``start..start+count-1``; shape ``(count, n+1)``."""
    out = np.zeros((count, n + 1), dtype=np.int64)
    if count == 0 or n == 0:
        return out
    nwords = (n + 63) // 64
    words = _words(seed, start, count, nwords).astype("<u8", copy=False)
    bits = np.unpackbits(words.view(np.uint8).reshape(count, -1), axis=1, bitorder="little")[:, :n]
    np.cumsum(2 * bits.astype(np.int64) - 1, axis=1, out=out[:, 1:])
    return out


def abs_endpoints(seed: int, start: int, count: int, n: int) -> np.ndarray:
    """``|S_n|`` for samples ``start..start+count-1`` without materialising the paths."""
    ones = np.zeros(count, dtype=np.int64)
    if count == 0 or n == 0:
        return ones
    keys = _keys(seed, start, count)
    full, rem = divmod(n, 64)
    for k in range(full):
        ones += np.bitwise_count(_mix64(keys + _offset(k + 1))).astype(np.int64)
    if rem:
        last = _mix64(keys + _offset(full + 1)) & np.uint64((1 << rem) - 1)
        ones += np.bitwise_count(last).astype(np.int64)
    return np.abs(2 * ones - n)
