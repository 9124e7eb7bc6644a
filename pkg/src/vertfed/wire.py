"""Wire formats: ciphertext serialization and transport message framing.

Group elements travel as fixed-width big-endian byte strings sized to the
modulus; every message renders to bytes so the transport can meter honest
payload sizes and tests can exercise the formats directly.
"""

import io
import struct
from dataclasses import dataclass

import numpy as np

from vertfed.mife import MifeCiphertext, MifeDerivedKey
from vertfed.sife import SifeCiphertext, SifeDerivedKey

WIRE_VERSION = 1

SIFE_CT_MAGIC = b"VFS1"
MIFE_CT_MAGIC = b"VFM1"

MODE_LINEAR = "linear"
MODE_NONLINEAR = "nonlinear"
_MODES = (MODE_LINEAR, MODE_NONLINEAR)


def elem_size(p):
    return (p.bit_length() + 7) // 8


def _write_elems(fh, values, size):
    for v in values:
        fh.write(int(v).to_bytes(size, "big"))


def _read_elems(fh, count, size):
    return tuple(int.from_bytes(fh.read(size), "big") for _ in range(count))


def _write_bigint(fh, value):
    blob = int(value).to_bytes((int(value).bit_length() + 7) // 8 or 1, "big")
    fh.write(struct.pack(">I", len(blob)))
    fh.write(blob)


def _read_bigint(fh):
    (n,) = struct.unpack(">I", fh.read(4))
    return int.from_bytes(fh.read(n), "big")


def _write_intvec(fh, values):
    fh.write(struct.pack(">I", len(values)))
    for v in values:
        fh.write(struct.pack(">q", int(v)))


def _read_intvec(fh):
    (n,) = struct.unpack(">I", fh.read(4))
    return tuple(struct.unpack(">q", fh.read(8))[0] for _ in range(n))


def _write_bigvec(fh, values):
    fh.write(struct.pack(">I", len(values)))
    for v in values:
        _write_bigint(fh, v)


def _write_floatvec(fh, values):
    arr = np.asarray(values, dtype=">f8")
    fh.write(struct.pack(">I", arr.size))
    fh.write(arr.tobytes())


def _read_floatvec(fh):
    (n,) = struct.unpack(">I", fh.read(4))
    return np.frombuffer(fh.read(8 * n), dtype=">f8").astype(np.float64)


def sife_ct_to_bytes(ct, p):
    size = elem_size(p)
    fh = io.BytesIO()
    fh.write(SIFE_CT_MAGIC)
    fh.write(struct.pack(">HHH", WIRE_VERSION, ct.eta, size))
    _write_elems(fh, (ct.c0,) + ct.c, size)
    return fh.getvalue()


def sife_ct_from_bytes(buf):
    fh = io.BytesIO(buf)
    if fh.read(4) != SIFE_CT_MAGIC:
        raise ValueError("not a sife ciphertext")
    version, eta, size = struct.unpack(">HHH", fh.read(6))
    if version != WIRE_VERSION:
        raise ValueError(f"unsupported wire version {version}")
    elems = _read_elems(fh, eta + 1, size)
    return SifeCiphertext(c0=elems[0], c=elems[1:])


def mife_ct_to_bytes(ct, p):
    size = elem_size(p)
    fh = io.BytesIO()
    fh.write(MIFE_CT_MAGIC)
    fh.write(struct.pack(">HHHH", WIRE_VERSION, ct.slot, ct.eta, size))
    _write_elems(fh, ct.t + ct.c, size)
    return fh.getvalue()


def mife_ct_from_bytes(buf):
    fh = io.BytesIO(buf)
    if fh.read(4) != MIFE_CT_MAGIC:
        raise ValueError("not a mife ciphertext")
    version, slot, eta, size = struct.unpack(">HHHH", fh.read(8))
    if version != WIRE_VERSION:
        raise ValueError(f"unsupported wire version {version}")
    elems = _read_elems(fh, eta + 2, size)
    return MifeCiphertext(slot=slot, t=elems[:2], c=elems[2:])


# ---------------------------------------------------------------------------
# transport messages


@dataclass(frozen=True)
class SetupBundle:
    party_id: int
    mife_key: object  # MifePartyKey
    sife_pk: object  # SifePublicKey
    otp_seed: bytes

    carries_ciphertext = False

    def to_bytes(self, p):
        fh = io.BytesIO()
        fh.write(b"B")
        fh.write(struct.pack(">HH", self.party_id, len(self.otp_seed)))
        fh.write(self.otp_seed)
        _write_bigvec(fh, self.mife_key.wa)
        _write_bigvec(fh, self.mife_key.u)
        size = elem_size(p)
        fh.write(struct.pack(">H", len(self.sife_pk.h)))
        _write_elems(fh, self.mife_key.g_a, size)
        _write_elems(fh, self.sife_pk.h, size)
        return fh.getvalue()


@dataclass(frozen=True)
class ClkRequest:
    """Aggregator-to-party trigger to submit identifier encodings."""

    carries_ciphertext = False

    def to_bytes(self, p=None):
        return b"c"

    @classmethod
    def from_bytes(cls, buf):
        assert buf == b"c"
        return cls()


@dataclass(frozen=True)
class ClkSubmission:
    party_id: int
    bitsets: tuple  # per record: int bitmask
    clk_len: int

    carries_ciphertext = False

    def to_bytes(self, p=None):
        nbytes = (self.clk_len + 7) // 8
        fh = io.BytesIO()
        fh.write(b"C")
        fh.write(struct.pack(">HIH", self.party_id, len(self.bitsets), self.clk_len))
        for bits in self.bitsets:
            fh.write(int(bits).to_bytes(nbytes, "big"))
        return fh.getvalue()

    @classmethod
    def from_bytes(cls, buf):
        fh = io.BytesIO(buf)
        assert fh.read(1) == b"C"
        party_id, count, clk_len = struct.unpack(">HIH", fh.read(8))
        nbytes = (clk_len + 7) // 8
        bitsets = tuple(int.from_bytes(fh.read(nbytes), "big") for _ in range(count))
        return cls(party_id=party_id, bitsets=bitsets, clk_len=clk_len)


@dataclass(frozen=True)
class PermutationMessage:
    party_id: int
    perm: tuple  # local row -> aligned row, -1 for unmatched
    aligned_count: int

    carries_ciphertext = False

    def to_bytes(self, p=None):
        fh = io.BytesIO()
        fh.write(b"P")
        fh.write(struct.pack(">HI", self.party_id, self.aligned_count))
        _write_intvec(fh, self.perm)
        return fh.getvalue()

    @classmethod
    def from_bytes(cls, buf):
        fh = io.BytesIO(buf)
        assert fh.read(1) == b"P"
        party_id, aligned = struct.unpack(">HI", fh.read(6))
        perm = _read_intvec(fh)
        return cls(party_id=party_id, perm=perm, aligned_count=aligned)


@dataclass(frozen=True)
class PartyQuery:
    epoch: int
    b_idx: int
    batch_size: int
    kind: str
    mode: str
    w_slice: tuple

    carries_ciphertext = False

    def to_bytes(self, p=None):
        fh = io.BytesIO()
        fh.write(b"Q")
        kind = self.kind.encode()
        fh.write(
            struct.pack(
                ">IIHBB", self.epoch, self.b_idx, self.batch_size,
                _MODES.index(self.mode), len(kind),
            )
        )
        fh.write(kind)
        _write_floatvec(fh, self.w_slice)
        return fh.getvalue()

    @classmethod
    def from_bytes(cls, buf):
        fh = io.BytesIO(buf)
        assert fh.read(1) == b"Q"
        epoch, b_idx, s, mode_i, klen = struct.unpack(">IIHBB", fh.read(12))
        kind = fh.read(klen).decode()
        w = tuple(_read_floatvec(fh))
        return cls(
            epoch=epoch, b_idx=b_idx, batch_size=s, kind=kind,
            mode=_MODES[mode_i], w_slice=w,
        )


@dataclass(frozen=True)
class PartyReply:
    party_id: int
    epoch: int
    b_idx: int
    mode: str
    fd_cts: tuple  # s MIFE ciphertexts of per-sample scalars
    sd_cts: tuple  # one SIFE ciphertext per owned feature column
    labels: object = None  # plaintext labels, nonlinear active party only

    carries_ciphertext = True

    def to_bytes(self, p):
        fh = io.BytesIO()
        fh.write(b"R")
        fh.write(
            struct.pack(
                ">HIIBHH", self.party_id, self.epoch, self.b_idx,
                _MODES.index(self.mode), len(self.fd_cts), len(self.sd_cts),
            )
        )
        for ct in self.fd_cts:
            blob = mife_ct_to_bytes(ct, p)
            fh.write(struct.pack(">I", len(blob)))
            fh.write(blob)
        for ct in self.sd_cts:
            blob = sife_ct_to_bytes(ct, p)
            fh.write(struct.pack(">I", len(blob)))
            fh.write(blob)
        if self.labels is None:
            fh.write(struct.pack(">B", 0))
        else:
            fh.write(struct.pack(">B", 1))
            _write_floatvec(fh, self.labels)
        return fh.getvalue()

    @classmethod
    def from_bytes(cls, buf):
        fh = io.BytesIO(buf)
        assert fh.read(1) == b"R"
        party_id, epoch, b_idx, mode_i, nfd, nsd = struct.unpack(">HIIBHH", fh.read(15))
        fd = []
        for _ in range(nfd):
            (n,) = struct.unpack(">I", fh.read(4))
            fd.append(mife_ct_from_bytes(fh.read(n)))
        sd = []
        for _ in range(nsd):
            (n,) = struct.unpack(">I", fh.read(4))
            sd.append(sife_ct_from_bytes(fh.read(n)))
        (has_labels,) = struct.unpack(">B", fh.read(1))
        labels = _read_floatvec(fh) if has_labels else None
        return cls(
            party_id=party_id, epoch=epoch, b_idx=b_idx, mode=_MODES[mode_i],
            fd_cts=tuple(fd), sd_cts=tuple(sd), labels=labels,
        )


@dataclass(frozen=True)
class KeyRequest:
    scheme: str  # "mife" (feature dim) | "sife" (sample dim)
    vector: tuple

    carries_ciphertext = False

    def __post_init__(self):
        if self.scheme not in ("mife", "sife"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "vector", tuple(int(v) for v in self.vector))

    def to_bytes(self, p=None):
        fh = io.BytesIO()
        fh.write(b"K")
        fh.write(struct.pack(">B", 0 if self.scheme == "mife" else 1))
        _write_intvec(fh, self.vector)
        return fh.getvalue()

    @classmethod
    def from_bytes(cls, buf):
        fh = io.BytesIO(buf)
        assert fh.read(1) == b"K"
        (tag,) = struct.unpack(">B", fh.read(1))
        vector = _read_intvec(fh)
        return cls(scheme="mife" if tag == 0 else "sife", vector=vector)


@dataclass(frozen=True)
class KeyResponse:
    scheme: str
    key: object  # MifeDerivedKey | SifeDerivedKey

    carries_ciphertext = False

    def to_bytes(self, p=None):
        fh = io.BytesIO()
        fh.write(b"k")
        if self.scheme == "mife":
            fh.write(struct.pack(">B", 0))
            fh.write(struct.pack(">H", len(self.key.d)))
            for d1, d2 in self.key.d:
                _write_bigint(fh, d1)
                _write_bigint(fh, d2)
            _write_bigint(fh, self.key.z)
            _write_intvec(fh, self.key.y)
        else:
            fh.write(struct.pack(">B", 1))
            _write_bigint(fh, self.key.dk)
            _write_intvec(fh, self.key.y)
        return fh.getvalue()

    @classmethod
    def from_bytes(cls, buf):
        fh = io.BytesIO(buf)
        assert fh.read(1) == b"k"
        (tag,) = struct.unpack(">B", fh.read(1))
        if tag == 0:
            (n,) = struct.unpack(">H", fh.read(2))
            d = tuple((_read_bigint(fh), _read_bigint(fh)) for _ in range(n))
            z = _read_bigint(fh)
            y = _read_intvec(fh)
            return cls(scheme="mife", key=MifeDerivedKey(d=d, z=z, y=y))
        dk = _read_bigint(fh)
        y = _read_intvec(fh)
        return cls(scheme="sife", key=SifeDerivedKey(dk=dk, y=y))


@dataclass(frozen=True)
class Rejection:
    reason: str

    carries_ciphertext = False

    def to_bytes(self, p=None):
        blob = self.reason.encode()
        return b"X" + struct.pack(">H", len(blob)) + blob

    @classmethod
    def from_bytes(cls, buf):
        assert buf[:1] == b"X"
        (n,) = struct.unpack(">H", buf[1:3])
        return cls(reason=buf[3 : 3 + n].decode())
