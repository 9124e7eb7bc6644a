"""Key authority: cryptosystem setup, per-party key bundles and the
inference-prevention gate that vets every functional-key request.

The authority's inbound surface is deliberately narrow: it accepts key
requests and nothing else, so ciphertexts and training data structurally
cannot reach it. Feature-dimension requests must name every registered
party and aggregate strictly more than the configured threshold;
sample-dimension requests must match the batch size exactly.
"""

import random
from dataclasses import dataclass, field

from vertfed import mife, sife
from vertfed.wire import KeyRequest, KeyResponse, Rejection, SetupBundle

REJECTION_REASON = "exploited vector"


class QuorumError(RuntimeError):
    """Fewer live parties than the aggregation threshold tolerates."""


@dataclass(frozen=True)
class AggregationPolicy:
    n_parties: int
    min_parties: int  # strict lower bound: sum(v) must exceed it
    batch_size: int

    def __post_init__(self):
        if not 1 <= self.min_parties <= self.n_parties:
            raise ValueError("threshold must satisfy 1 <= t <= n")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class KeyAuthority:
    ctx: object
    policy: AggregationPolicy
    rng: random.Random
    slot_lengths: tuple = None
    audit_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.policy.n_parties < 2:
            raise ValueError("need at least two parties")
        if self.slot_lengths is None:
            self.slot_lengths = (1,) * self.policy.n_parties
        self._mife_msk = mife.setup(self.ctx, self.slot_lengths, self.rng)
        self._sife_msk = sife.setup(self.ctx, self.policy.batch_size, self.rng)
        self._otp_seed = self.rng.randbytes(32)

    # -- distribution ----------------------------------------------------

    def party_bundle(self, party_id):
        """Keys and shared batch seed for a 1-based party id."""
        return SetupBundle(
            party_id=party_id,
            mife_key=mife.skdist(self._mife_msk, party_id),
            sife_pk=self._sife_msk.public,
            otp_seed=self._otp_seed,
        )

    def aggregator_params(self):
        """Public parameters only; no master secret material leaves here."""
        return self._mife_msk.public, self._sife_msk.public

    # -- key service -----------------------------------------------------

    def inspect(self, request):
        """Gate a request vector; True means a key may be derived for it."""
        v = request.vector
        if request.scheme == "mife":
            return len(v) == self.policy.n_parties and sum(v) > self.policy.min_parties
        return len(v) == self.policy.batch_size

    def query_key_service(self, request):
        if not isinstance(request, KeyRequest):
            raise TypeError("key authority only accepts key requests")
        ok = self.inspect(request)
        self.audit_log.append((request.scheme, request.vector, ok))
        if not ok:
            return Rejection(reason=REJECTION_REASON)
        if request.scheme == "mife":
            return KeyResponse(scheme="mife", key=mife.dkgen(self._mife_msk, request.vector))
        return KeyResponse(scheme="sife", key=sife.dkgen(self._sife_msk, request.vector))

    # transport entry point
    def handle(self, msg):
        return self.query_key_service(msg)
