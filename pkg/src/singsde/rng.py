"""Counter-based Philox4x64-10 generator addressable by (particle, step).

Each block of four normals is keyed by ``(seed, 0)`` with counter
``(particle, step // 4, 0, 0)``, so any draw can be regenerated without
replaying the stream and results do not depend on scheduling.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


@njit(inline="always", nogil=True)
def _mulhilo(a, b):
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    t = hl + (ll >> _S32)
    w1 = (t & _MASK32) + lh
    hi = hh + (t >> _S32) + (w1 >> _S32)
    return hi, lo


@njit(nogil=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten rounds of Philox4x64 on a 256-bit counter with a 128-bit key."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(nogil=True)
def normal_block(seed, particle, block, out):
    """Fill ``out[0:4]`` with the four normals of one counter block (Box-Muller)."""
    r0, r1, r2, r3 = philox4x64(np.uint64(particle), np.uint64(block), np.uint64(0), np.uint64(0),
                                np.uint64(seed), np.uint64(0))
    # u0, u2 in (0, 1) so the logarithm is finite
    u0 = (np.float64(r0 >> _S11) + 0.5) * _INV53
    u1 = np.float64(r1 >> _S11) * _INV53
    u2 = (np.float64(r2 >> _S11) + 0.5) * _INV53
    u3 = np.float64(r3 >> _S11) * _INV53
    ra = math.sqrt(-2.0 * math.log(u0))
    rb = math.sqrt(-2.0 * math.log(u2))
    out[0] = ra * math.cos(_TWO_PI * u1)
    out[1] = ra * math.sin(_TWO_PI * u1)
    out[2] = rb * math.cos(_TWO_PI * u3)
    out[3] = rb * math.sin(_TWO_PI * u3)


def raw_block(seed: int, particle: int, block: int) -> tuple[int, int, int, int]:
    """The four 64-bit words of one counter block (for testing)."""
    return tuple(int(v) for v in philox4x64(np.uint64(particle), np.uint64(block), np.uint64(0), np.uint64(0),
                                            np.uint64(seed), np.uint64(0)))


def standard_normal(seed: int, particle: int, step: int) -> float:
    """The normal used by ``particle`` at ``step``."""
    out = np.empty(4)
    normal_block(np.uint64(seed), np.uint64(particle), np.uint64(step >> 2), out)
    return float(out[step & 3])
