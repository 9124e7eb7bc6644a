"""Prime-order group generation, exponentiation and bounded discrete logs.

Two profiles: a test profile (32..2047 bits) built on a safe prime p = 2q+1,
and a production profile (>= 2048 bits) built on a 256-bit prime-order
subgroup, where a literal safe-prime search would be prohibitively slow.
Both satisfy the same contract: q prime, q | p-1, g generates the order-q
subgroup.

Discrete logs are recovered with a hybrid: a precomputed table mapping
g**f -> f for |f| <= table bound, and a giant-step search that reuses the
table as its baby steps, probing windows of width 2*bound+1 outward from
zero. Signed exponents are handled by probing h and h**-1 in parallel.
"""

import hmac
import os
import random
import struct
from dataclasses import dataclass, field

import gmpy2
import numpy as np

from vertfed import backend
from vertfed.backend import FAST_MODULUS_LIMIT, MISS

_GEN_ATTEMPTS = 500_000
_SUBGROUP_ORDER_BITS = 256

TABLE_MAGIC = b"VFDT"
TABLE_VERSION = 1


class GroupGenerationError(RuntimeError):
    """Prime search exhausted its attempt budget."""


class DlogRangeError(ValueError):
    """No exponent within the requested bound maps to the target element."""


def _is_prime(n):
    return bool(gmpy2.is_prime(int(n)))


def _seed_rng(seed):
    if seed is None:
        return random.Random(os.urandom(32))
    if isinstance(seed, int):
        seed = seed.to_bytes((seed.bit_length() + 7) // 8 or 1, "big", signed=False)
    digest = hmac.new(b"vertfed.groupgen", seed, "sha256").digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass(frozen=True)
class GroupContext:
    """Multiplicative group mod p with designated order-q subgroup <g>."""

    p: int
    q: int
    g: int
    bits: int

    def __post_init__(self):
        if pow(self.g, self.q, self.p) != 1 or self.g == 1:
            raise ValueError("generator does not span an order-q subgroup")

    @property
    def fast(self):
        """True when kernels may use word-sized modular arithmetic."""
        return self.p < FAST_MODULUS_LIMIT

    @property
    def max_signed(self):
        """Largest magnitude recoverable without mod-q sign ambiguity."""
        return (self.q - 1) // 2

    def pow(self, base, exponent):
        """base**exponent mod p for base in <g>; exponent may be negative."""
        return pow(base, exponent % self.q, self.p)

    def inv(self, x):
        return pow(x, self.p - 2, self.p)

    def rand_exponent(self, rng):
        return rng.randrange(self.q)

    def fingerprint(self):
        return (self.p, self.q, self.g)


def group_gen(bits, seed=None):
    """Generate group parameters for security level ``bits``.

    Deterministic for a fixed seed. Raises GroupGenerationError if the prime
    search does not converge within the attempt budget.
    """
    if bits < 32:
        raise ValueError("security level below 32 bits is not supported")
    rng = _seed_rng(seed)
    if bits >= 2048:
        return _gen_subgroup(bits, rng)
    return _gen_safe_prime(bits, rng)


def _gen_safe_prime(bits, rng):
    for _ in range(_GEN_ATTEMPTS):
        q = rng.getrandbits(bits - 1) | (1 << (bits - 2)) | 1
        p = 2 * q + 1
        if _is_prime(q) and _is_prime(p):
            break
    else:
        raise GroupGenerationError(f"no {bits}-bit safe prime found")
    while True:
        h = rng.randrange(2, p - 1)
        g = pow(h, 2, p)
        if g != 1:
            return GroupContext(p=p, q=q, g=g, bits=bits)


def _gen_subgroup(bits, rng):
    for _ in range(_GEN_ATTEMPTS):
        q = rng.getrandbits(_SUBGROUP_ORDER_BITS) | (1 << (_SUBGROUP_ORDER_BITS - 1)) | 1
        if _is_prime(q):
            break
    else:
        raise GroupGenerationError("no subgroup order found")
    # cofactor range keeping p = q*k + 1 at exactly `bits` bits
    k_min = (-((1 << (bits - 1)) // -q) + 1) & ~1
    k_max = ((1 << bits) - 2) // q
    k0 = k_min + 2 * rng.randrange(max(1, (k_max - k_min) // 4))
    for i in range(_GEN_ATTEMPTS):
        k = k0 + 2 * i
        if k > k_max:
            k = k_min + (k - k_max)
        p = q * k + 1
        if p.bit_length() == bits and _is_prime(p):
            break
    else:
        raise GroupGenerationError(f"no {bits}-bit modulus over the chosen subgroup")
    cofactor = (p - 1) // q
    while True:
        h = rng.randrange(2, p - 1)
        g = pow(h, cofactor, p)
        if g != 1:
            return GroupContext(p=p, q=q, g=g, bits=bits)


class DlogTable:
    """Precomputed map from g**f to f for all |f| <= bound."""

    def __init__(self, p, g, bound, hkeys=None, hvals=None, mapping=None):
        self.p = p
        self.g = g
        self.bound = bound
        self._hkeys = hkeys
        self._hvals = hvals
        self._map = mapping

    @classmethod
    def build(cls, ctx, bound):
        if bound < 0:
            raise ValueError("table bound must be nonnegative")
        if 2 * bound + 1 > ctx.q:
            raise ValueError("table bound exceeds subgroup capacity")
        if ctx.fast:
            pos = backend.power_chain(1, ctx.g, ctx.p, bound + 1)
            hkeys, hvals = backend.hash_table_create(2 * bound + 1)
            backend.hash_insert(hkeys, hvals, pos, np.arange(bound + 1, dtype=np.int64))
            if bound:
                ginv = ctx.inv(ctx.g)
                neg = backend.power_chain(ginv, ginv, ctx.p, bound)
                backend.hash_insert(
                    hkeys, hvals, neg, -np.arange(1, bound + 1, dtype=np.int64)
                )
            return cls(ctx.p, ctx.g, bound, hkeys=hkeys, hvals=hvals)
        mapping = {}
        acc = 1
        for f in range(bound + 1):
            mapping[acc] = f
            acc = acc * ctx.g % ctx.p
        acc = ginv = ctx.inv(ctx.g)
        for f in range(1, bound + 1):
            mapping.setdefault(acc, -f)
            acc = acc * ginv % ctx.p
        return cls(ctx.p, ctx.g, bound, mapping=mapping)

    def lookup(self, h):
        """Exponent for h, or None when h is outside the covered range."""
        if self._map is not None:
            return self._map.get(h)
        out = backend.hash_probe(
            self._hkeys, self._hvals, np.array([h], dtype=np.uint64)
        )
        return None if out[0] == MISS else int(out[0])

    def lookup_many(self, hs):
        if self._map is not None:
            return np.array(
                [self._map.get(int(h), MISS) for h in hs], dtype=np.int64
            )
        return backend.hash_probe(self._hkeys, self._hvals, hs)

    def __len__(self):
        return 2 * self.bound + 1

    # -- on-disk cache -------------------------------------------------

    def save(self, path):
        elems, exps = self._records()
        with open(path, "wb") as fh:
            fh.write(TABLE_MAGIC)
            fh.write(struct.pack(">HH", TABLE_VERSION, 0))
            for value in (self.p, self.g):
                blob = value.to_bytes((value.bit_length() + 7) // 8, "big")
                fh.write(struct.pack(">I", len(blob)))
                fh.write(blob)
            fh.write(struct.pack(">qQ", self.bound, len(elems)))
            for elem, f in zip(elems, exps):
                blob = int(elem).to_bytes((int(elem).bit_length() + 7) // 8 or 1, "big")
                fh.write(struct.pack(">I", len(blob)))
                fh.write(blob)
                fh.write(struct.pack(">q", int(f)))

    def _records(self):
        if self._map is not None:
            items = sorted(self._map.items(), key=lambda kv: kv[1])
            return [k for k, _ in items], [v for _, v in items]
        live = self._hkeys != 0
        order = np.argsort(self._hvals[live])
        return self._hkeys[live][order], self._hvals[live][order]

    @classmethod
    def load(cls, path, ctx):
        with open(path, "rb") as fh:
            if fh.read(4) != TABLE_MAGIC:
                raise ValueError("not a dlog table file")
            version, _ = struct.unpack(">HH", fh.read(4))
            if version != TABLE_VERSION:
                raise ValueError(f"unsupported dlog table version {version}")
            stored = []
            for _ in range(2):
                (n,) = struct.unpack(">I", fh.read(4))
                stored.append(int.from_bytes(fh.read(n), "big"))
            p, g = stored
            bound, count = struct.unpack(">qQ", fh.read(16))
            if (p, g) != (ctx.p, ctx.g):
                raise ValueError("dlog table was built for a different group")
            elems = np.empty(count, dtype=object)
            exps = np.empty(count, dtype=np.int64)
            for i in range(count):
                (n,) = struct.unpack(">I", fh.read(4))
                elems[i] = int.from_bytes(fh.read(n), "big")
                (exps[i],) = struct.unpack(">q", fh.read(8))
        if ctx.fast:
            hkeys, hvals = backend.hash_table_create(count)
            backend.hash_insert(
                hkeys, hvals, elems.astype(np.uint64), exps
            )
            return cls(p, g, bound, hkeys=hkeys, hvals=hvals)
        return cls(p, g, bound, mapping={int(e): int(f) for e, f in zip(elems, exps)})


def cache_path(directory, ctx, bound):
    tag = f"{ctx.p:x}-{ctx.g:x}-{bound:x}"
    digest = hmac.new(b"vertfed.dlogcache", tag.encode(), "sha256").hexdigest()[:24]
    return os.path.join(directory, f"dlog-{digest}.tbl")


_TABLE_MEMO = {}


def load_or_build_table(ctx, bound, cache_dir=None):
    """Table for (ctx, bound), reusing in-process and on-disk caches."""
    memo_key = (ctx.p, ctx.g, bound)
    if memo_key in _TABLE_MEMO:
        return _TABLE_MEMO[memo_key]
    if cache_dir is None:
        cache_dir = os.environ.get("VERTFED_DLOG_CACHE") or None
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        path = cache_path(cache_dir, ctx, bound)
        if os.path.exists(path):
            table = DlogTable.load(path, ctx)
        else:
            table = DlogTable.build(ctx, bound)
            table.save(path)
    else:
        table = DlogTable.build(ctx, bound)
    _TABLE_MEMO[memo_key] = table
    return table


@dataclass
class DlogSolver:
    """Hybrid recovery: table hit first, windowed giant-step search after.

    The group and table are immutable; the window-power cache grows by
    atomic reference swap, so concurrent solves stay correct (a racing
    extension at worst recomputes a slice).
    """

    ctx: GroupContext
    table: DlogTable
    _gpows: np.ndarray = field(default=None, repr=False)
    _gstep: int = field(default=None, repr=False)

    def __post_init__(self):
        if (self.table.p, self.table.g) != (self.ctx.p, self.ctx.g):
            raise ValueError("table does not match group")
        self.window = 2 * self.table.bound + 1
        self._gstep = self.ctx.pow(self.ctx.g, -self.window)

    def _max_window(self, bound):
        if bound <= self.table.bound:
            return 0
        return -((bound - self.table.bound) // -self.window)  # ceil

    def _check_capacity(self, bound):
        max_i = self._max_window(bound)
        reach = max_i * self.window + self.table.bound
        if 2 * reach + 1 > self.ctx.q:
            raise ValueError(
                f"dlog bound {bound} exceeds group capacity (q={self.ctx.q})"
            )
        return max_i

    def _extend_gpows(self, up_to):
        # gpows[k] = g**(-window*(k+1)); grown lazily, shared across queries
        have = 0 if self._gpows is None else self._gpows.shape[0]
        if up_to <= have:
            return
        if have == 0:
            chain = backend.power_chain(self._gstep, self._gstep, self.ctx.p, up_to)
            self._gpows = chain
        else:
            start = backend.mulmod_vec(
                self._gpows[-1:], np.array([self._gstep], dtype=np.uint64), self.ctx.p
            )[0]
            extra = backend.power_chain(start, self._gstep, self.ctx.p, up_to - have)
            self._gpows = np.concatenate([self._gpows, extra])

    def solve(self, h, bound):
        return self.solve_many([h], bound)[0]

    def solve_many(self, hs, bound):
        """Signed exponents for group elements hs, each with |f| <= bound."""
        if bound < 0:
            raise ValueError("bound must be nonnegative")
        max_i = self._check_capacity(bound)
        if self.ctx.fast:
            found = self._solve_fast(hs, bound, max_i)
        else:
            found = [self._solve_big(int(h), bound, max_i) for h in hs]
        out = []
        for h, f in zip(hs, found):
            if f == MISS or abs(int(f)) > bound:
                raise DlogRangeError(
                    f"no exponent within [-{bound}, {bound}] for element {int(h)}"
                )
            out.append(int(f))
        return out

    def _solve_fast(self, hs, bound, max_i):
        hs = np.ascontiguousarray(hs, dtype=np.uint64)
        found = self.table.lookup_many(hs)
        if max_i == 0 or not (found == MISS).any():
            return found
        qexp = np.full(hs.shape[0], self.ctx.q - 1, dtype=np.uint64)
        hinvs = backend.powmod_vec(hs, qexp, self.ctx.p)
        lo, step = 1, 1024
        while lo <= max_i and (found == MISS).any():
            hi = min(max_i, lo + step - 1)
            self._extend_gpows(hi)
            backend.search_windows(
                hs,
                hinvs,
                self._gpows[lo - 1 : hi],
                lo,
                self.window,
                self.table._hkeys,
                self.table._hvals,
                self.ctx.p,
                found,
            )
            lo = hi + 1
            step = min(step * 4, 1 << 20)
        return found

    def _solve_big(self, h, bound, max_i):
        f = self.table.lookup(h)
        if f is not None:
            return f
        gstep = self._gstep
        hinv = self.ctx.inv(h)
        a, b = h, hinv
        for i in range(1, max_i + 1):
            a = a * gstep % self.ctx.p
            j = self.table.lookup(a)
            if j is not None:
                return i * self.window + j
            b = b * gstep % self.ctx.p
            j = self.table.lookup(b)
            if j is not None:
                return -(i * self.window + j)
        return int(MISS)


def dlog(ctx, table, h, bound):
    """Recover f with g**f = h and |f| <= bound (table first, search after)."""
    return DlogSolver(ctx, table).solve(h, bound)
