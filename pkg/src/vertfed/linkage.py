"""Private entity resolution: keyed bloom-filter encodings of record
identifiers, Dice-coefficient matching and per-party permutation vectors.

Greedy matching is deterministic: candidate pairs are taken in descending
score order with ties broken by the lowest index, and each encoding is
matched at most once. An exact-match fast path on raw identifiers is kept
as the oracle for tests and clean-join deployments.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

UNMATCHED = -1


class EncodingError(ValueError):
    pass


class ResolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClkConfig:
    length: int = 1024
    num_hashes: int = 2
    ngram: int = 2
    key: bytes = b"vertfed-linkage"


@dataclass(frozen=True)
class Clk:
    bits: int
    length: int

    def popcount(self):
        return self.bits.bit_count()


def _ngrams(text, n):
    text = " ".join(str(text).split()).lower()
    if not text:
        return []
    padded = f" {text} "
    if len(padded) <= n:
        return [padded]
    return [padded[i : i + n] for i in range(len(padded) - n + 1)]


def build_clk(identifier, config=ClkConfig()):
    """Deterministic keyed encoding of one record's identifier field(s)."""
    if isinstance(identifier, str):
        fields = [identifier]
    else:
        fields = [str(f) for f in identifier]
    grams = []
    for f in fields:
        grams.extend(_ngrams(f, config.ngram))
    if not grams:
        raise EncodingError("empty identifier")
    bits = 0
    for gram in grams:
        data = gram.encode()
        for k in range(config.num_hashes):
            digest = hashlib.blake2b(
                data, key=config.key, salt=k.to_bytes(8, "big")
            ).digest()
            bits |= 1 << (int.from_bytes(digest[:8], "big") % config.length)
    return Clk(bits=bits, length=config.length)


def dice(a, b):
    """2|a & b| / (|a| + |b|) over set bits."""
    if a.length != b.length:
        raise ValueError("encodings have different lengths")
    total = a.popcount() + b.popcount()
    if total == 0:
        return 1.0 if a.bits == b.bits else 0.0
    return 2.0 * (a.bits & b.bits).bit_count() / total


def _greedy_pairs(ref, other, threshold):
    scored = []
    for i, a in enumerate(ref):
        for j, b in enumerate(other):
            s = dice(a, b)
            if s >= threshold:
                scored.append((-s, i, j))
    scored.sort()
    used_ref, used_other, pairs = set(), set(), {}
    for neg_s, i, j in scored:
        if i in used_ref or j in used_other:
            continue
        used_ref.add(i)
        used_other.add(j)
        pairs[i] = j
    return pairs


def match_and_permute(clk_lists, threshold=0.8):
    """Align >=2 parties' records; returns one permutation vector per party.

    perm[local_row] is the aligned row index, UNMATCHED for rows excluded
    from training. The aligned space covers reference rows matched by every
    party.
    """
    if len(clk_lists) < 2:
        raise ValueError("need at least two parties")
    ref = clk_lists[0]
    per_party = [_greedy_pairs(ref, other, threshold) for other in clk_lists[1:]]
    aligned_refs = [i for i in range(len(ref)) if all(i in m for m in per_party)]
    if not aligned_refs:
        raise ResolutionError("no records matched across all parties")
    pos = {ref_i: k for k, ref_i in enumerate(aligned_refs)}
    perms = []
    first = np.full(len(ref), UNMATCHED, dtype=np.int64)
    for ref_i, k in pos.items():
        first[ref_i] = k
    perms.append(first)
    for mapping, other in zip(per_party, clk_lists[1:]):
        perm = np.full(len(other), UNMATCHED, dtype=np.int64)
        for ref_i, k in pos.items():
            perm[mapping[ref_i]] = k
        perms.append(perm)
    return perms


def exact_match_permutations(id_lists):
    """Oracle alignment on raw identifiers (exact string equality)."""
    if len(id_lists) < 2:
        raise ValueError("need at least two parties")
    maps = []
    for ids in id_lists[1:]:
        lookup = {}
        for j, v in enumerate(ids):
            lookup.setdefault(str(v), j)
        maps.append(lookup)
    aligned_refs = [
        (i, v) for i, v in enumerate(id_lists[0]) if all(str(v) in m for m in maps)
    ]
    if not aligned_refs:
        raise ResolutionError("no records matched across all parties")
    perms = [np.full(len(ids), UNMATCHED, dtype=np.int64) for ids in id_lists]
    for k, (ref_i, v) in enumerate(aligned_refs):
        perms[0][ref_i] = k
        for pi, m in enumerate(maps):
            perms[pi + 1][m[str(v)]] = k
    return perms
