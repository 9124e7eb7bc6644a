"""Kernel backend selection: numba fast path with a pure-numpy fallback.

Set VERTFED_BACKEND=numpy to force the fallback (or =numba to require the
jitted path). Both backends implement the same primitives for moduli below
2**52; larger moduli are handled by the big-integer paths in ``groups``.
"""

import os

import numpy as np

FAST_MODULUS_LIMIT = 1 << 52

MISS = np.int64(np.iinfo(np.int64).min)

_HASH_MAGIC = np.uint64(0x9E3779B97F4A7C15)
_TOP = np.uint64(0x8000000000000000)

_requested = os.environ.get("VERTFED_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"VERTFED_BACKEND must be auto|numba|numpy, got {_requested!r}")

HAS_NUMBA = False
if _requested in ("auto", "numba"):
    try:
        from vertfed import _accel

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        _accel = None
else:
    _accel = None

ACTIVE = "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations


def _np_mulmod(a, b, p):
    q = (a.astype(np.float64) * b.astype(np.float64) / np.float64(p)).astype(np.uint64)
    r = a * b - q * p  # uint64 wraparound; true residual within a few p of 0
    for _ in range(3):
        r = np.where(r >= _TOP, r + p, r)
    for _ in range(3):
        r = np.where((r < _TOP) & (r >= p), r - p, r)
    return r


def _np_powmod_vec(bases, exps, p):
    out = np.ones(bases.shape[0], dtype=np.uint64)
    b = bases % p
    e = exps.copy()
    while True:
        live = e > 0
        if not live.any():
            break
        odd = live & ((e & np.uint64(1)) == 1)
        if odd.any():
            out[odd] = _np_mulmod(out[odd], b[odd], p)
        b[live] = _np_mulmod(b[live], b[live], p)
        e[live] >>= np.uint64(1)
    return out


def _np_power_chain(start, step, p, count):
    # doubling scheme: extend [x0..x_{k-1}] to 2k entries with one vector op
    out = np.empty(count, dtype=np.uint64)
    if count == 0:
        return out
    out[0] = start
    filled = 1
    step_arr = np.array([step], dtype=np.uint64)
    while filled < count:
        take = min(filled, count - filled)
        # multiplier step**filled
        mult = _np_powmod_vec(step_arr, np.array([filled], dtype=np.uint64), p)[0]
        out[filled : filled + take] = _np_mulmod(
            out[:take], np.full(take, mult, dtype=np.uint64), p
        )
        filled += take
    return out


def _hash_shift(size):
    return np.uint64(64 - int(size).bit_length() + 1)


def _np_hash_insert(hkeys, hvals, keys, vals):
    size = hkeys.shape[0]
    mask = np.uint64(size - 1)
    shift = _hash_shift(size)
    idx = (keys * _HASH_MAGIC) >> shift
    pending = np.arange(keys.shape[0])
    while pending.size:
        slot = idx[pending]
        # first writer per slot wins this round; the rest advance one step
        order = np.argsort(slot, kind="stable")
        slot_sorted = slot[order]
        first = np.ones(slot_sorted.shape[0], dtype=bool)
        first[1:] = slot_sorted[1:] != slot_sorted[:-1]
        winners = pending[order[first]]
        wslot = slot_sorted[first].astype(np.int64)
        free = hkeys[wslot] == 0
        place = winners[free]
        hkeys[wslot[free]] = keys[place]
        hvals[wslot[free]] = vals[place]
        done = np.zeros(keys.shape[0], dtype=bool)
        done[place] = True
        pending = pending[~done[pending]]
        idx[pending] = (idx[pending] + np.uint64(1)) & mask


def _np_hash_probe(hkeys, hvals, cands):
    size = hkeys.shape[0]
    mask = np.uint64(size - 1)
    shift = _hash_shift(size)
    out = np.full(cands.shape[0], MISS, dtype=np.int64)
    idx = (cands * _HASH_MAGIC) >> shift
    live = np.arange(cands.shape[0])
    while live.size:
        got = hkeys[idx[live].astype(np.int64)]
        hit = got == cands[live]
        empty = got == 0
        out[live[hit]] = hvals[idx[live[hit]].astype(np.int64)]
        cont = ~(hit | empty)
        live = live[cont]
        idx[live] = (idx[live] + np.uint64(1)) & mask
    return out


def _np_search_windows(hs, hinvs, gpows, lo, width, hkeys, hvals, p, found):
    unresolved = np.where(found == MISS)[0]
    if unresolved.size == 0:
        return found
    nwin = gpows.shape[0]
    block = max(1, (1 << 18) // max(1, unresolved.size))
    for start in range(0, nwin, block):
        gp = gpows[start : start + block]
        cands_pos = _np_mulmod(hs[unresolved, None], gp[None, :], p).ravel()
        cands_neg = _np_mulmod(hinvs[unresolved, None], gp[None, :], p).ravel()
        jp = _np_hash_probe(hkeys, hvals, cands_pos)
        jn = _np_hash_probe(hkeys, hvals, cands_neg)
        wbase = (np.int64(lo + start) + np.arange(gp.shape[0], dtype=np.int64)) * np.int64(width)
        jp = jp.reshape(unresolved.size, gp.shape[0])
        jn = jn.reshape(unresolved.size, gp.shape[0])
        for row, t in enumerate(unresolved):
            if found[t] != MISS:
                continue
            hits_p = np.where(jp[row] != MISS)[0]
            hits_n = np.where(jn[row] != MISS)[0]
            best = None
            if hits_p.size:
                k = hits_p[0]
                best = (k, wbase[k] + jp[row, k])
            if hits_n.size:
                k = hits_n[0]
                cand = -(wbase[k] + jn[row, k])
                if best is None or k < best[0]:
                    best = (k, cand)
            if best is not None:
                found[t] = best[1]
        unresolved = np.where(found == MISS)[0]
        if unresolved.size == 0:
            break
    return found


# ---------------------------------------------------------------------------
# dispatch


def mulmod_vec(a, b, p):
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    if HAS_NUMBA:
        out = np.empty(a.shape[0], dtype=np.uint64)
        return _accel.mulmod_vec(a, b, np.uint64(p), out)
    return _np_mulmod(a, b, np.uint64(p))


# below this size the parallel kernels' thread wakeup costs more than the work
_SEQ_CUTOFF = 64


def powmod_vec(bases, exps, p):
    bases = np.ascontiguousarray(bases, dtype=np.uint64)
    exps = np.ascontiguousarray(exps, dtype=np.uint64)
    if HAS_NUMBA:
        out = np.empty(bases.shape[0], dtype=np.uint64)
        fn = _accel.powmod_vec_seq if bases.shape[0] < _SEQ_CUTOFF else _accel.powmod_vec
        return fn(bases, exps, np.uint64(p), out)
    return _np_powmod_vec(bases, exps, np.uint64(p))


def power_chain(start, step, p, count):
    """[start, start*step, start*step**2, ...] mod p, ``count`` entries."""
    if HAS_NUMBA:
        out = np.empty(count, dtype=np.uint64)
        return _accel.power_chain(np.uint64(start), np.uint64(step), np.uint64(p), out)
    return _np_power_chain(np.uint64(start), np.uint64(step), np.uint64(p), count)


def hash_table_create(n_entries):
    """Zeroed open-addressing table sized to load factor <= 0.5."""
    size = 1
    while size < 2 * n_entries:
        size <<= 1
    return np.zeros(size, dtype=np.uint64), np.zeros(size, dtype=np.int64)


def hash_insert(hkeys, hvals, keys, vals):
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    vals = np.ascontiguousarray(vals, dtype=np.int64)
    if HAS_NUMBA:
        _accel.hash_insert(hkeys, hvals, keys, vals)
    else:
        _np_hash_insert(hkeys, hvals, keys, vals)


def hash_probe(hkeys, hvals, cands):
    cands = np.ascontiguousarray(cands, dtype=np.uint64)
    if HAS_NUMBA:
        out = np.empty(cands.shape[0], dtype=np.int64)
        fn = _accel.hash_probe_vec_seq if cands.shape[0] < _SEQ_CUTOFF else _accel.hash_probe_vec
        return fn(hkeys, hvals, cands, out)
    return _np_hash_probe(hkeys, hvals, cands)


def search_windows(hs, hinvs, gpows, lo, width, hkeys, hvals, p, found):
    """Giant-step window probe; see groups.DlogSolver for the driver."""
    if HAS_NUMBA:
        fn = _accel.search_windows_seq if hs.shape[0] < 3 else _accel.search_windows
        return fn(
            hs, hinvs, gpows, np.int64(lo), np.int64(width), hkeys, hvals, np.uint64(p), found
        )
    return _np_search_windows(hs, hinvs, gpows, lo, width, hkeys, hvals, np.uint64(p), found)
