"""Single-input functional encryption for inner products (DDH-style).

Setup publishes h_i = g**s_i; a derived key for a plaintext vector y is the
scalar <y, s> mod q. Decryption under that key cancels the randomness and
leaves g**<x, y>, recovered by a bounded discrete log. All plaintexts are
signed integers produced by the fixed-point codec.
"""

from dataclasses import dataclass


class DimensionError(ValueError):
    """Vector length does not match the scheme's configured length."""


@dataclass(frozen=True)
class SifePublicKey:
    ctx: object
    h: tuple

    @property
    def eta(self):
        return len(self.h)


@dataclass(frozen=True)
class SifeMasterKey:
    public: SifePublicKey
    s: tuple


@dataclass(frozen=True)
class SifeCiphertext:
    c0: int
    c: tuple

    @property
    def eta(self):
        return len(self.c)


@dataclass(frozen=True)
class SifeDerivedKey:
    dk: int
    y: tuple


def setup(ctx, eta, rng):
    if eta < 1:
        raise ValueError("vector length must be >= 1")
    s = tuple(ctx.rand_exponent(rng) for _ in range(eta))
    h = tuple(ctx.pow(ctx.g, si) for si in s)
    return SifeMasterKey(public=SifePublicKey(ctx=ctx, h=h), s=s)


def dkgen(msk, y):
    if len(y) != len(msk.s):
        raise DimensionError(f"expected length {len(msk.s)}, got {len(y)}")
    q = msk.public.ctx.q
    dk = sum(int(yi) * si for yi, si in zip(y, msk.s)) % q
    return SifeDerivedKey(dk=dk, y=tuple(int(v) for v in y))


def encrypt(pk, x, rng):
    if len(x) != pk.eta:
        raise DimensionError(f"expected length {pk.eta}, got {len(x)}")
    ctx = pk.ctx
    r = rng.randrange(1, ctx.q)
    c0 = ctx.pow(ctx.g, r)
    c = tuple(
        ctx.pow(hi, r) * ctx.pow(ctx.g, int(xi)) % ctx.p for hi, xi in zip(pk.h, x)
    )
    return SifeCiphertext(c0=c0, c=c)


def combine(pk, ct, key, y):
    """g**<x, y>: the randomness-free group element, one dlog from the answer."""
    if len(y) != ct.eta or len(key.y) != ct.eta:
        raise DimensionError(f"expected length {ct.eta}")
    if tuple(int(v) for v in y) != key.y:
        raise ValueError("derived key was issued for a different vector")
    ctx = pk.ctx
    acc = 1
    for ci, yi in zip(ct.c, y):
        acc = acc * ctx.pow(ci, int(yi)) % ctx.p
    return acc * ctx.inv(ctx.pow(ct.c0, key.dk)) % ctx.p


def decrypt(pk, ct, key, y, bound, solver):
    """Exact <x, y> for the vector x inside ct, given |<x, y>| <= bound."""
    return solver.solve(combine(pk, ct, key, y), bound)
