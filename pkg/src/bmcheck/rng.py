"""Counter-based random number generation with deterministic substreams.

Path simulation draws every normal variate from a Philox4x32-10 block whose
counter encodes (global path index, step index, block index), so the value of
any single variate is independent of execution order, chunking, and thread
count.  All other randomness (permutations, bootstrap resamples, Monte Carlo
sampling) goes through numpy Philox generators keyed by a stable hash of
(master seed, stage name, indices); numpy generates those streams
sequentially, so they are reproducible by construction.
"""

import hashlib

import numpy as np
import numba
from numba import njit, prange

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)

_TWO_NEG64 = 2.0 ** -64
_TWO_PI = 2.0 * np.pi

MAX_SEED = 2 ** 64 - 1


def philox4x32_ref(ctr, key, rounds=10):
    """Pure-python Philox4x32 reference.

    Counter is a 4-tuple and key a 2-tuple of ints (taken mod 2^32).  Kept
    for known-answer tests against the compiled kernel; far too slow for
    production use.
    """
    c0, c1, c2, c3 = [c & 0xFFFFFFFF for c in ctr]
    k0, k1 = [k & 0xFFFFFFFF for k in key]
    for _ in range(rounds):
        p0 = 0xD2511F53 * c0
        p1 = 0xCD9E8D57 * c2
        c0, c1, c2, c3 = ((p1 >> 32) ^ c1 ^ k0, p1 & 0xFFFFFFFF,
                          (p0 >> 32) ^ c3 ^ k1, p0 & 0xFFFFFFFF)
        k0 = (k0 + 0x9E3779B9) & 0xFFFFFFFF
        k1 = (k1 + 0xBB67AE85) & 0xFFFFFFFF
    return c0, c1, c2, c3


@njit(numba.types.UniTuple(numba.uint64, 4)(
    numba.uint64, numba.uint64, numba.uint64, numba.uint64,
    numba.uint64, numba.uint64), inline="always", cache=True)
def _philox_block(c0, c1, c2, c3, k0, k1):
    # 32-bit lanes carried in uint64; Philox multiplies need the full
    # 64-bit product, so masking back to 32 bits happens after each round.
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & MASK32
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & MASK32
        c0 = (hi1 ^ c1 ^ k0) & MASK32
        c1 = lo1
        c2 = (hi0 ^ c3 ^ k1) & MASK32
        c3 = lo0
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


@njit(parallel=True, cache=True)
def fill_normals(out, key0, key1, path_offset):
    """Fill out[(path, step, coord)] with standard normals.

    Each (path, step, block-of-two-coords) triple owns one Philox block;
    Box-Muller turns its four 32-bit words into two normals.  path_offset
    shifts the counter's path lane so chunked generation matches a single
    full-array call bit for bit.
    """
    n_paths, n_steps, dim = out.shape
    nblk = (dim + 1) // 2
    for i in prange(n_paths):
        gp = np.uint64(path_offset + i)
        for j in range(n_steps):
            for b in range(nblk):
                w0, w1, w2, w3 = _philox_block(
                    gp, np.uint64(j), np.uint64(b), np.uint64(0),
                    np.uint64(key0), np.uint64(key1))
                x1 = (w0 << np.uint64(32)) | w1
                x2 = (w2 << np.uint64(32)) | w3
                # u1 in (0, 1] so the log is finite; u2 in [0, 1)
                u1 = (np.float64(x1) + 1.0) * _TWO_NEG64
                u2 = np.float64(x2) * _TWO_NEG64
                r = np.sqrt(-2.0 * np.log(u1))
                out[i, j, 2 * b] = r * np.cos(_TWO_PI * u2)
                if 2 * b + 1 < dim:
                    out[i, j, 2 * b + 1] = r * np.sin(_TWO_PI * u2)


def _digest(master_seed, stage, indices):
    if not 0 <= master_seed <= MAX_SEED:
        raise ValueError(f"seed must fit in 64 bits, got {master_seed}")
    payload = "|".join([str(int(master_seed)), str(stage)]
                       + [str(int(i)) for i in indices])
    return hashlib.sha256(payload.encode("ascii")).digest()


def derive_key(master_seed, stage, *indices):
    """128-bit integer key for the (stage, indices) substream."""
    return int.from_bytes(_digest(master_seed, stage, indices)[:16], "little")


def derive_key32_pair(master_seed, stage, *indices):
    """Two 32-bit words keying the compiled Philox path kernel."""
    d = _digest(master_seed, stage, indices)
    k0 = int.from_bytes(d[:4], "little")
    k1 = int.from_bytes(d[4:8], "little")
    return k0, k1


def substream(master_seed, stage, *indices):
    """Independent numpy generator for the named stage."""
    return np.random.Generator(
        np.random.Philox(key=derive_key(master_seed, stage, *indices)))
