"""Numba-jitted kernels for modular arithmetic on word-sized moduli.

All kernels assume an odd modulus p < 2**52 so that the float-assisted
reduction in ``mulmod`` stays exact: a 52x52-bit product still gives a
correctly rounded quotient estimate in a float64, and the residual fixup
needs at most a few steps. Inputs/outputs are uint64 arrays.
"""

import warnings

import numpy as np

warnings.filterwarnings("ignore", message=".*TBB.*")  # old system TBB is fine to skip
from numba import int64, njit, prange, uint64

MISS = np.int64(np.iinfo(np.int64).min)

_HASH_MAGIC = uint64(0x9E3779B97F4A7C15)


@njit(uint64(uint64, uint64, uint64), cache=True, inline="always")
def _mulmod(a, b, p):
    q = uint64(np.float64(a) * np.float64(b) / np.float64(p))
    r = a * b - q * p  # wraps mod 2**64; true value is within a few p of 0
    while r >= uint64(0x8000000000000000):
        r += p
    while r >= p:
        r -= p
    return r


@njit(cache=True)
def mulmod_vec(a, b, p, out):
    for i in range(a.shape[0]):
        out[i] = _mulmod(a[i], b[i], p)
    return out


@njit(cache=True)
def mulmod_scalar_vec(a, b, p, out):
    for i in range(b.shape[0]):
        out[i] = _mulmod(a, b[i], p)
    return out


@njit(uint64(uint64, uint64, uint64), cache=True)
def _powmod(base, e, p):
    acc = uint64(1)
    b = base % p
    while e > uint64(0):
        if e & uint64(1):
            acc = _mulmod(acc, b, p)
        b = _mulmod(b, b, p)
        e >>= uint64(1)
    return acc


@njit(cache=True, parallel=True)
def powmod_vec(bases, exps, p, out):
    for i in prange(bases.shape[0]):
        out[i] = _powmod(bases[i], exps[i], p)
    return out


@njit(cache=True)
def powmod_vec_seq(bases, exps, p, out):
    for i in range(bases.shape[0]):
        out[i] = _powmod(bases[i], exps[i], p)
    return out


@njit(cache=True)
def power_chain(start, step, p, out):
    """out[i] = start * step**i mod p, computed sequentially."""
    acc = start
    for i in range(out.shape[0]):
        out[i] = acc
        acc = _mulmod(acc, step, p)
    return out


@njit(cache=True)
def hash_insert(hkeys, hvals, keys, vals):
    """Open-addressing insert; hkeys must be zero-initialised (0 = empty)."""
    size = uint64(hkeys.shape[0])
    mask = size - uint64(1)
    shift = uint64(64)
    while size > uint64(1):
        size >>= uint64(1)
        shift -= uint64(1)
    for i in range(keys.shape[0]):
        k = keys[i]
        idx = (k * _HASH_MAGIC) >> shift
        while hkeys[idx] != uint64(0):
            idx = (idx + uint64(1)) & mask
        hkeys[idx] = k
        hvals[idx] = vals[i]


@njit(int64(uint64[:], int64[:], uint64, uint64, uint64), cache=True, inline="always")
def _probe(hkeys, hvals, k, shift, mask):
    idx = (k * _HASH_MAGIC) >> shift
    while True:
        hk = hkeys[idx]
        if hk == uint64(0):
            return MISS
        if hk == k:
            return hvals[idx]
        idx = (idx + uint64(1)) & mask


@njit(cache=True, parallel=True)
def hash_probe_vec(hkeys, hvals, cands, out):
    size = uint64(hkeys.shape[0])
    mask = size - uint64(1)
    shift = uint64(64)
    while size > uint64(1):
        size >>= uint64(1)
        shift -= uint64(1)
    for i in prange(cands.shape[0]):
        out[i] = _probe(hkeys, hvals, cands[i], shift, mask)
    return out


@njit(cache=True)
def hash_probe_vec_seq(hkeys, hvals, cands, out):
    size = uint64(hkeys.shape[0])
    mask = size - uint64(1)
    shift = uint64(64)
    while size > uint64(1):
        size >>= uint64(1)
        shift -= uint64(1)
    for i in range(cands.shape[0]):
        out[i] = _probe(hkeys, hvals, cands[i], shift, mask)
    return out


@njit(cache=True, inline="always")
def _search_one(h, hinv, gpows, lo, width, hkeys, hvals, p, shift, mask):
    for k in range(gpows.shape[0]):
        c = _mulmod(h, gpows[k], p)
        j = _probe(hkeys, hvals, c, shift, mask)
        if j != MISS:
            return (int64(lo) + int64(k)) * int64(width) + j
        c = _mulmod(hinv, gpows[k], p)
        j = _probe(hkeys, hvals, c, shift, mask)
        if j != MISS:
            return -((int64(lo) + int64(k)) * int64(width) + j)
    return MISS


@njit(cache=True, parallel=True)
def search_windows(hs, hinvs, gpows, lo, width, hkeys, hvals, p, found):
    """Probe giant-step windows lo..lo+len(gpows)-1 for each unresolved query.

    gpows[k] = g**(-width*(lo+k)) mod p. A hit at window i with table value j
    means h = g**(width*i + j); the mirrored probe on hinv yields the negative
    branch. found[t] stays MISS when the exponent lies beyond these windows.
    """
    size = uint64(hkeys.shape[0])
    mask = size - uint64(1)
    shift = uint64(64)
    while size > uint64(1):
        size >>= uint64(1)
        shift -= uint64(1)
    for t in prange(hs.shape[0]):
        if found[t] == MISS:
            found[t] = _search_one(
                hs[t], hinvs[t], gpows, lo, width, hkeys, hvals, p, shift, mask
            )
    return found


@njit(cache=True)
def search_windows_seq(hs, hinvs, gpows, lo, width, hkeys, hvals, p, found):
    size = uint64(hkeys.shape[0])
    mask = size - uint64(1)
    shift = uint64(64)
    while size > uint64(1):
        size >>= uint64(1)
        shift -= uint64(1)
    for t in range(hs.shape[0]):
        if found[t] == MISS:
            found[t] = _search_one(
                hs[t], hinvs[t], gpows, lo, width, hkeys, hvals, p, shift, mask
            )
    return found
