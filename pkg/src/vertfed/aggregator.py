"""Training orchestration: query fan-out, the two secure aggregation
phases, gradient assembly, weight updates and loss rounds.

Per batch the aggregator collects one encrypted reply per party, zeroes the
fusion weight of absentees, decrypts the per-sample sums under a
feature-dimension key, derives the residual weights, then decrypts one
u-weighted column sum per feature under a sample-dimension key. It never
sees a batch's row identities, any single party's partial model, or (on
the label-folding path) the labels.
"""

from dataclasses import dataclass, field

import numpy as np

from vertfed import mife, models, sife
from vertfed.linkage import Clk, match_and_permute
from vertfed.wire import ClkRequest, KeyRequest, PartyQuery, PermutationMessage, Rejection


class ProtocolError(RuntimeError):
    pass


SKIP_QUORUM = "quorum"
SKIP_ACTIVE_ABSENT = "active party absent"


@dataclass
class BatchRecord:
    """Everything a plaintext replay needs to audit one batch."""

    epoch: int
    b_idx: int
    kind: str
    w: np.ndarray  # weights the batch ran with
    v: tuple  # fusion vector actually used
    gradient: np.ndarray = None
    u: np.ndarray = None
    skipped: str = None


@dataclass
class Aggregator:
    bus: object
    codec: object
    solver: object
    policy: object  # AggregationPolicy
    kind: str
    party_names: list
    party_ranges: list  # (start, stop) global column range per party
    active_party: int  # 1-based index into party_names
    d_total: int
    alpha: float
    lam: float = 0.0
    per_batch_update: bool = True
    name: str = "aggregator"
    authority: str = "authority"
    w: np.ndarray = None
    records: list = field(default_factory=list)
    skips: list = field(default_factory=list)

    def __post_init__(self):
        models.check_kind(self.kind)
        if self.w is None:
            self.w = np.zeros(self.d_total)
        self.mode = models.protocol_mode(self.kind)
        unit = int(np.ceil(self.codec.value_bound * self.codec.scale))
        self._fd_bound = self.policy.n_parties * unit
        self._sd_bound = self.policy.batch_size * unit * unit

    # -- key service -------------------------------------------------------

    def _fetch_key(self, scheme, vector):
        reply = self.bus.request(self.name, self.authority, KeyRequest(scheme=scheme, vector=vector))
        if isinstance(reply, Rejection):
            raise ProtocolError(f"key request rejected: {reply.reason}")
        return reply.key

    # -- collection ----------------------------------------------------------

    def _collect(self, epoch, b_idx, phase):
        s = self.policy.batch_size
        n = self.policy.n_parties
        replies = {}
        v = [0] * n
        with self.bus.timed(epoch, b_idx, phase):
            for i, pname in enumerate(self.party_names):
                start, stop = self.party_ranges[i]
                query = PartyQuery(
                    epoch=epoch,
                    b_idx=b_idx,
                    batch_size=s,
                    kind=self.kind,
                    mode=self.mode,
                    w_slice=tuple(self.w[start:stop]),
                )
                reply = self.bus.request(self.name, pname, query)
                if reply is None:
                    continue
                # stale or mismatched replies are discarded, not trusted
                if (reply.epoch, reply.b_idx) != (epoch, b_idx) or reply.mode != self.mode:
                    continue
                replies[i] = reply
                v[i] = 1
        return replies, tuple(v)

    def _feature_dim(self, epoch, b_idx, replies, v, phase):
        """Per-sample aggregated sums u (folded path) or scores z."""
        s = self.policy.batch_size
        n = self.policy.n_parties
        dk_v = self._fetch_key("mife", v)
        pp = self._mife_pp
        with self.bus.timed(epoch, b_idx, f"{phase}/feature_sa"):
            elems = []
            for k in range(s):
                cts = [
                    replies[i].fd_cts[k] if i in replies else mife.dummy_ciphertext(i + 1, 1)
                    for i in range(n)
                ]
                elems.append(mife.combine(pp, cts, dk_v, v))
            ints = self.solver.solve_many(elems, self._fd_bound)
        return self.codec.decode_vec(ints, depth=1)

    def _sample_dim(self, epoch, b_idx, replies, u_int):
        """Gradient components for every feature owned by a responding party."""
        dk_u = self._fetch_key("sife", tuple(int(x) for x in u_int))
        grad = np.zeros(self.d_total)
        present = np.zeros(self.d_total, dtype=bool)
        with self.bus.timed(epoch, b_idx, "gradient/sample_sa"):
            elems, cols = [], []
            for i, reply in replies.items():
                start, stop = self.party_ranges[i]
                for j, ct in enumerate(reply.sd_cts):
                    elems.append(sife.combine(self._sife_pk, ct, dk_u, dk_u.y))
                    cols.append(start + j)
            ints = self.solver.solve_many(elems, self._sd_bound)
        s = self.policy.batch_size
        for col, raw in zip(cols, ints):
            grad[col] = self.codec.decode(raw, depth=2) / s + self.lam * self.w[col]
            present[col] = True
        return grad, present

    # -- public parameters are installed once by the runner -------------------

    def install_params(self, mife_pp, sife_pk):
        self._mife_pp = mife_pp
        self._sife_pk = sife_pk

    # -- private entity resolution ---------------------------------------------

    def resolve_entities(self, threshold=0.8):
        """Collect identifier encodings, match them and ship permutations.

        Returns the aligned row count every party now shares.
        """
        with self.bus.timed(None, None, "entity_resolution"):
            clk_lists = []
            for pname in self.party_names:
                sub = self.bus.request(self.name, pname, ClkRequest())
                if sub is None:
                    raise ProtocolError(f"{pname} did not submit encodings")
                clk_lists.append([Clk(bits=b, length=sub.clk_len) for b in sub.bitsets])
            perms = match_and_permute(clk_lists, threshold)
            aligned = int(perms[0].max()) + 1
            for i, (pname, perm) in enumerate(zip(self.party_names, perms)):
                self.bus.request(
                    self.name,
                    pname,
                    PermutationMessage(party_id=i + 1, perm=tuple(perm), aligned_count=aligned),
                )
        return aligned

    # -- one batch -------------------------------------------------------------

    def run_batch(self, epoch, b_idx):
        """One two-phase aggregation; returns the gradient or None if skipped."""
        replies, v = self._collect(epoch, b_idx, "gradient")
        record = BatchRecord(epoch=epoch, b_idx=b_idx, kind=self.kind, w=self.w.copy(), v=v)
        if self.mode == "linear" and (self.active_party - 1) not in replies:
            record.skipped = SKIP_ACTIVE_ABSENT
            self.records.append(record)
            self.skips.append((epoch, b_idx, record.skipped))
            return None
        if sum(v) <= self.policy.min_parties:
            record.skipped = SKIP_QUORUM
            self.records.append(record)
            self.skips.append((epoch, b_idx, record.skipped))
            return None
        agg = self._feature_dim(epoch, b_idx, replies, v, "gradient")
        if self.mode == "nonlinear":
            active_reply = replies[self.active_party - 1]
            if active_reply.labels is None:
                raise ProtocolError("active party disclosed no labels in nonlinear mode")
            u = models.compute_u(self.kind, agg, active_reply.labels)
        else:
            u = agg
        u_int = self.codec.encode_vec(u)
        grad, present = self._sample_dim(epoch, b_idx, replies, u_int)
        record.gradient = grad
        record.u = u
        self.records.append(record)
        return grad

    # -- epoch loops --------------------------------------------------------------

    def update_weights(self, gradient):
        self.w = self.w - self.alpha * np.asarray(gradient)
        return self.w

    def secure_gradient_epoch(self, epoch, batches_per_epoch):
        """Epoch gradient as the mean over its non-skipped batches."""
        grads = [g for b in range(batches_per_epoch) if (g := self.run_batch(epoch, b)) is not None]
        if not grads:
            return None
        return np.mean(grads, axis=0)

    def train_epoch(self, epoch, batches_per_epoch):
        if self.per_batch_update:
            for b in range(batches_per_epoch):
                g = self.run_batch(epoch, b)
                if g is not None:
                    self.update_weights(g)
        else:
            g = self.secure_gradient_epoch(epoch, batches_per_epoch)
            if g is not None:
                self.update_weights(g)
        return self.w

    # -- secure loss -------------------------------------------------------------

    def secure_loss(self, epoch, b_idx=0):
        """Batch loss from feature-dimension sums alone (one reply per party)."""
        replies, v = self._collect(epoch, b_idx, "loss")
        if self.mode == "linear" and (self.active_party - 1) not in replies:
            raise ProtocolError(SKIP_ACTIVE_ABSENT)
        if sum(v) <= self.policy.min_parties:
            raise ProtocolError(SKIP_QUORUM)
        agg = self._feature_dim(epoch, b_idx, replies, v, "loss")
        if self.mode == "nonlinear":
            labels = replies[self.active_party - 1].labels
            if labels is None:
                raise ProtocolError("active party disclosed no labels in nonlinear mode")
            return models.scored_loss(self.kind, agg, labels, self.w, self.lam)
        return models.folded_loss(self.kind, agg, self.w, self.lam)
