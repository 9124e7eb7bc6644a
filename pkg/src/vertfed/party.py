"""Party-side protocol: shared-seed batch selection, partial-model
computation and the two encryption passes (per-sample feature-dimension
ciphertexts, per-column sample-dimension ciphertexts).

Batch membership is derived from the authority-issued seed with a keyed
hash chain, so every party draws identical rows while the aggregator,
which never sees the seed, cannot reconstruct or link batches.
"""

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from vertfed import mife, models, sife
from vertfed.linkage import UNMATCHED, ClkConfig, build_clk
from vertfed.wire import ClkRequest, ClkSubmission, PartyQuery, PartyReply


class BatchError(RuntimeError):
    pass


class ProvisioningError(RuntimeError):
    pass


class OtpChain:
    """Keyed-hash index derivation shared by all holders of the seed."""

    def __init__(self, seed):
        if isinstance(seed, int):
            seed = seed.to_bytes(16, "big", signed=False)
        self._seed = bytes(seed)

    def batch_indices(self, epoch, b_idx, batch_size, n_rows):
        """batch_size distinct row indices; deterministic in all arguments."""
        if batch_size > n_rows:
            raise BatchError(f"batch of {batch_size} from only {n_rows} rows")
        picked = []
        seen = set()
        counter = 0
        while len(picked) < batch_size:
            digest = hashlib.blake2b(
                struct.pack(">QQQ", epoch, b_idx, counter),
                key=self._seed,
                digest_size=8,
            ).digest()
            counter += 1
            idx = int.from_bytes(digest, "big") % n_rows
            if idx not in seen:
                seen.add(idx)
                picked.append(idx)
        return np.array(picked, dtype=np.int64)


@dataclass
class PartyShard:
    """One party's vertical slice of the training table."""

    party_id: int  # 1-based; doubles as the MIFE slot id
    features: np.ndarray  # rows x owned columns, bias column included if active
    col_start: int  # owned range within the global weight vector
    col_stop: int
    labels: np.ndarray = None  # 0/1, active party only
    ids: list = None  # identifier column, present when resolution is needed

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.shape[1] != self.col_stop - self.col_start:
            raise ValueError("feature block does not match the owned column range")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.float64)

    @property
    def is_active(self):
        return self.labels is not None

    @property
    def width(self):
        return self.col_stop - self.col_start


@dataclass
class PartyAgent:
    shard: PartyShard
    codec: object
    rng: object  # encryption nonce source
    mife_key: object = None
    sife_pk: object = None
    chain: OtpChain = None
    clk_config: ClkConfig = None
    _w_slice: np.ndarray = field(default=None, repr=False)

    # -- provisioning ------------------------------------------------------

    def install_bundle(self, bundle):
        if bundle.party_id != self.shard.party_id:
            raise ProvisioningError("bundle addressed to a different party")
        self.mife_key = bundle.mife_key
        self.sife_pk = bundle.sife_pk
        self.chain = OtpChain(bundle.otp_seed)

    # -- private entity resolution ------------------------------------------

    def clk_submission(self, config=None):
        config = config or self.clk_config or ClkConfig()
        if self.shard.ids is None:
            raise ProvisioningError("shard has no identifier column")
        clks = [build_clk(i, config) for i in self.shard.ids]
        return ClkSubmission(
            party_id=self.shard.party_id,
            bitsets=tuple(c.bits for c in clks),
            clk_len=config.length,
        )

    def apply_permutation(self, msg):
        """Re-order local rows into the aligned space; drop unmatched rows."""
        perm = np.asarray(msg.perm, dtype=np.int64)
        if perm.shape[0] != self.shard.features.shape[0]:
            raise ProvisioningError("permutation length does not match rows")
        aligned = np.empty((msg.aligned_count, self.shard.width))
        order = np.full(msg.aligned_count, -1, dtype=np.int64)
        for local, target in enumerate(perm):
            if target != UNMATCHED:
                order[target] = local
        if (order < 0).any():
            raise ProvisioningError("permutation does not cover the aligned space")
        aligned[:] = self.shard.features[order]
        self.shard.features = aligned
        if self.shard.labels is not None:
            self.shard.labels = self.shard.labels[order]
        if self.shard.ids is not None:
            self.shard.ids = [self.shard.ids[i] for i in order]

    # -- training ------------------------------------------------------------

    def receive_partial_weights(self, w_slice):
        w_slice = np.asarray(w_slice, dtype=np.float64)
        if w_slice.shape[0] != self.shard.width:
            raise ValueError(
                f"expected {self.shard.width} weights, got {w_slice.shape[0]}"
            )
        self._w_slice = w_slice

    def select_batch(self, b_idx, batch_size, epoch=0):
        if self.chain is None:
            raise ProvisioningError("no batch seed installed")
        return self.chain.batch_indices(epoch, b_idx, batch_size, self.shard.features.shape[0])

    def query(self, query):
        """Handle one aggregator query; returns the encrypted reply."""
        if self.mife_key is None or self.sife_pk is None:
            raise ProvisioningError("party keys not installed")
        self.receive_partial_weights(query.w_slice)
        rows = self.select_batch(query.b_idx, query.batch_size, epoch=query.epoch)
        block = self.shard.features[rows]
        z_part = block @ self._w_slice
        labels_out = None
        if query.mode == "linear":
            c1, c0 = models.residual_transform(query.kind)
            partial = c1 * z_part
            if self.shard.is_active:
                y = models.map_labels(query.kind, self.shard.labels[rows])
                partial = partial - y + c0
        else:
            partial = z_part
            if self.shard.is_active:
                labels_out = models.map_labels(query.kind, self.shard.labels[rows])
        fd = tuple(
            mife.encrypt(self.mife_key, [int(v)], self.rng)
            for v in self.codec.encode_vec(partial)
        )
        sd = tuple(
            sife.encrypt(self.sife_pk, self.codec.encode_vec(block[:, j]), self.rng)
            for j in range(self.shard.width)
        )
        return PartyReply(
            party_id=self.shard.party_id,
            epoch=query.epoch,
            b_idx=query.b_idx,
            mode=query.mode,
            fd_cts=fd,
            sd_cts=sd,
            labels=labels_out,
        )

    # transport entry point
    def handle(self, msg):
        if isinstance(msg, PartyQuery):
            return self.query(msg)
        if isinstance(msg, ClkRequest):
            return self.clk_submission()
        if hasattr(msg, "otp_seed"):  # SetupBundle
            self.install_bundle(msg)
            return None
        if hasattr(msg, "aligned_count"):  # PermutationMessage
            self.apply_permutation(msg)
            return None
        raise TypeError(f"party cannot handle {type(msg).__name__}")
