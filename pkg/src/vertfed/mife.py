"""Multi-input functional encryption for inner products across party slots.

Each slot i holds a secret pad u_i and a 2-column matrix W_i; ciphertexts
carry t_i = g**(a r_i) (two elements, a = (1, a)) and
c_i = g**(x_i + u_i + (W_i a) r_i). A derived key for y = (y_1 || ... || y_n)
is ({d_i = y_i W_i}, z = sum y_i u_i); decryption multiplies the per-slot
ratios [y_i c_i] / [d_i t_i], divides by g**z, and takes a bounded dlog.
Exponent material is sampled in Z_q so all arithmetic stays in the
prime-order subgroup.
"""

from dataclasses import dataclass

from vertfed.sife import DimensionError


class KeyServiceError(KeyError):
    """Requested slot id is not registered."""


class MissingSlotError(RuntimeError):
    """A ciphertext is absent for a slot with nonzero aggregation weight."""


@dataclass(frozen=True)
class MifePublicParams:
    ctx: object
    g_a: tuple  # (g, g**a)
    g_wa: tuple  # per slot: tuple of g**(W_i a)_j

    @property
    def etas(self):
        return tuple(len(v) for v in self.g_wa)

    @property
    def n_slots(self):
        return len(self.g_wa)


@dataclass(frozen=True)
class MifeMasterKey:
    public: MifePublicParams
    a: int
    w: tuple  # per slot: tuple of (w_j1, w_j2) rows
    u: tuple  # per slot: tuple of pads


@dataclass(frozen=True)
class MifePartyKey:
    slot: int  # 1-based
    ctx: object
    g_a: tuple
    wa: tuple  # (W_i a) as plaintext exponents
    u: tuple

    @property
    def eta(self):
        return len(self.wa)


@dataclass(frozen=True)
class MifeCiphertext:
    slot: int
    t: tuple  # two elements
    c: tuple

    @property
    def eta(self):
        return len(self.c)


@dataclass(frozen=True)
class MifeDerivedKey:
    d: tuple  # per slot: (d_i1, d_i2)
    z: int
    y: tuple


def setup(ctx, etas, rng):
    etas = tuple(int(e) for e in etas)
    if not etas or any(e < 1 for e in etas):
        raise ValueError("need at least one slot, every slot length >= 1")
    a = ctx.rand_exponent(rng)
    w = tuple(
        tuple((ctx.rand_exponent(rng), ctx.rand_exponent(rng)) for _ in range(e))
        for e in etas
    )
    u = tuple(tuple(ctx.rand_exponent(rng) for _ in range(e)) for e in etas)
    g_wa = tuple(
        tuple(ctx.pow(ctx.g, (w1 + w2 * a) % ctx.q) for (w1, w2) in rows) for rows in w
    )
    pp = MifePublicParams(ctx=ctx, g_a=(ctx.g, ctx.pow(ctx.g, a)), g_wa=g_wa)
    return MifeMasterKey(public=pp, a=a, w=w, u=u)


def skdist(msk, slot_id):
    """Per-party key for a 1-based slot id; stable across calls."""
    n = msk.public.n_slots
    if not 1 <= slot_id <= n:
        raise KeyServiceError(f"slot {slot_id} outside [1, {n}]")
    ctx = msk.public.ctx
    rows = msk.w[slot_id - 1]
    wa = tuple((w1 + w2 * msk.a) % ctx.q for (w1, w2) in rows)
    return MifePartyKey(
        slot=slot_id, ctx=ctx, g_a=msk.public.g_a, wa=wa, u=msk.u[slot_id - 1]
    )


def dkgen(msk, y):
    ctx = msk.public.ctx
    etas = msk.public.etas
    if len(y) != sum(etas):
        raise DimensionError(f"expected length {sum(etas)}, got {len(y)}")
    y = tuple(int(v) for v in y)
    d = []
    z = 0
    pos = 0
    for rows, pads in zip(msk.w, msk.u):
        yi = y[pos : pos + len(rows)]
        pos += len(rows)
        d1 = sum(v * r[0] for v, r in zip(yi, rows)) % ctx.q
        d2 = sum(v * r[1] for v, r in zip(yi, rows)) % ctx.q
        d.append((d1, d2))
        z += sum(v * p for v, p in zip(yi, pads))
    return MifeDerivedKey(d=tuple(d), z=z % ctx.q, y=y)


def encrypt(pkey, x, rng):
    if len(x) != pkey.eta:
        raise DimensionError(f"expected length {pkey.eta}, got {len(x)}")
    ctx = pkey.ctx
    r = rng.randrange(1, ctx.q)
    t = (ctx.pow(pkey.g_a[0], r), ctx.pow(pkey.g_a[1], r))
    c = tuple(
        ctx.pow(ctx.g, (int(xj) + uj + waj * r) % ctx.q)
        for xj, uj, waj in zip(x, pkey.u, pkey.wa)
    )
    return MifeCiphertext(slot=pkey.slot, t=t, c=c)


def dummy_ciphertext(slot_id, eta):
    """Identity-element placeholder; valid only under zero slot weight."""
    return MifeCiphertext(slot=slot_id, t=(1, 1), c=(1,) * eta)


def combine(pp, cts, dk, y):
    """g**<x, y>: per-slot ratios multiplied out, one dlog from the answer.

    cts holds one ciphertext per slot in order; a None entry is tolerated
    only when that slot's weights are all zero (a dummy is substituted).
    """
    ctx = pp.ctx
    etas = pp.etas
    if len(cts) != pp.n_slots:
        raise DimensionError(f"expected {pp.n_slots} slot ciphertexts, got {len(cts)}")
    if len(y) != sum(etas) or tuple(int(v) for v in y) != dk.y:
        raise ValueError("derived key was issued for a different vector")
    acc = 1
    pos = 0
    for i, (ct, eta) in enumerate(zip(cts, etas)):
        yi = [int(v) for v in y[pos : pos + eta]]
        pos += eta
        if ct is None:
            if any(yi):
                raise MissingSlotError(f"slot {i + 1} absent but carries weight")
            continue
        if ct.eta != eta:
            raise DimensionError(f"slot {i + 1}: expected length {eta}, got {ct.eta}")
        num = 1
        for cj, yj in zip(ct.c, yi):
            num = num * ctx.pow(cj, yj) % ctx.p
        den = ctx.pow(ct.t[0], dk.d[i][0]) * ctx.pow(ct.t[1], dk.d[i][1]) % ctx.p
        acc = acc * num * ctx.inv(den) % ctx.p
    return acc * ctx.inv(ctx.pow(ctx.g, dk.z)) % ctx.p


def decrypt(pp, cts, dk, y, bound, solver):
    """Exact <(x_1 || ... || x_n), y>, given |result| <= bound."""
    return solver.solve(combine(pp, cts, dk, y), bound)
