"""In-process message transport with byte-level metering.

The bus enforces the deployment topology: parties talk only to the
aggregator, the authority accepts nothing but key requests, and no
party-to-party channel exists at all. Every delivered message is serialized
once so the meter counts real payload bytes; a fault hook simulates
parties missing the reply deadline.
"""

import time
from collections import defaultdict
from dataclasses import dataclass, field

from vertfed.wire import KeyRequest


class TopologyError(RuntimeError):
    pass


@dataclass
class Meter:
    """Per-iteration ledger of message counts, bytes and phase timings."""

    records: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    _phase: tuple = (None, None, None)

    def set_phase(self, epoch, b_idx, phase):
        self._phase = (epoch, b_idx, phase)

    def record(self, src, dst, src_role, dst_role, msg_type, nbytes, crypto):
        epoch, b_idx, phase = self._phase
        self.records.append(
            {
                "epoch": epoch,
                "b_idx": b_idx,
                "phase": phase,
                "src": src,
                "dst": dst,
                "src_role": src_role,
                "dst_role": dst_role,
                "msg_type": msg_type,
                "bytes": nbytes,
                "crypto": crypto,
            }
        )

    def add_timing(self, epoch, b_idx, phase, seconds):
        self.timings.append(
            {"epoch": epoch, "b_idx": b_idx, "phase": phase, "elapsed_s": seconds}
        )

    # -- queries -----------------------------------------------------------

    def party_to_party_count(self):
        return sum(
            1
            for r in self.records
            if r["src_role"] == "party" and r["dst_role"] == "party"
        )

    def crypto_party_messages(self, epoch=None, b_idx=None, phase=None):
        """Ciphertext-bearing messages sent by parties, optionally filtered."""
        count = 0
        for r in self.records:
            if not (r["crypto"] and r["src_role"] == "party"):
                continue
            if epoch is not None and r["epoch"] != epoch:
                continue
            if b_idx is not None and r["b_idx"] != b_idx:
                continue
            if phase is not None and r["phase"] != phase:
                continue
            count += 1
        return count

    def total_bytes(self):
        return sum(r["bytes"] for r in self.records)

    def phase_bytes(self):
        out = defaultdict(int)
        for r in self.records:
            out[(r["epoch"], r["b_idx"], r["phase"])] += r["bytes"]
        return dict(out)

    def iteration_rows(self):
        """Deterministic per-iteration summary rows (no wall-clock fields)."""
        agg = {}
        for r in self.records:
            key = (r["epoch"], r["b_idx"], r["phase"])
            row = agg.setdefault(
                key,
                {
                    "epoch": key[0],
                    "b_idx": key[1],
                    "phase": key[2],
                    "messages": 0,
                    "party_crypto_messages": 0,
                    "authority_messages": 0,
                    "party_to_party_messages": 0,
                    "bytes": 0,
                },
            )
            row["messages"] += 1
            row["bytes"] += r["bytes"]
            if r["crypto"] and r["src_role"] == "party":
                row["party_crypto_messages"] += 1
            if "authority" in (r["src_role"], r["dst_role"]):
                row["authority_messages"] += 1
            if r["src_role"] == "party" and r["dst_role"] == "party":
                row["party_to_party_messages"] += 1
        return [agg[k] for k in sorted(agg, key=lambda k: (k[0] or 0, k[1] or 0, str(k[2])))]


class MessageBus:
    """Synchronous request/reply transport between named agents."""

    def __init__(self, modulus, latency_fn=None):
        self.modulus = modulus
        self.meter = Meter()
        self.latency_fn = latency_fn  # simulated seconds per delivery
        self.sim_clock = 0.0
        self._agents = {}
        self._fault = None

    def register(self, name, handler, role):
        if role not in ("party", "aggregator", "authority"):
            raise ValueError(f"unknown role {role!r}")
        self._agents[name] = (handler, role)

    def set_fault(self, fn):
        """fn(dst_name, msg) -> True to silently drop the delivery."""
        self._fault = fn

    def _check_topology(self, src_role, dst_role, msg):
        if src_role == "party" and dst_role == "party":
            raise TopologyError("no party-to-party channel exists")
        if dst_role == "authority" and not isinstance(msg, KeyRequest):
            raise TopologyError("authority accepts key requests only")

    def request(self, src, dst, msg):
        """Deliver msg and return the reply (None if dst stayed silent)."""
        _, src_role = self._agents[src]
        handler, dst_role = self._agents[dst]
        self._check_topology(src_role, dst_role, msg)
        if self._fault is not None and self._fault(dst, msg):
            return None
        nbytes = len(msg.to_bytes(self.modulus))
        self.meter.record(src, dst, src_role, dst_role, type(msg).__name__, nbytes, msg.carries_ciphertext)
        if self.latency_fn is not None:
            self.sim_clock += self.latency_fn(src, dst, nbytes)
        reply = handler(msg)
        if reply is not None:
            rbytes = len(reply.to_bytes(self.modulus))
            self.meter.record(dst, src, dst_role, src_role, type(reply).__name__, rbytes, reply.carries_ciphertext)
            if self.latency_fn is not None:
                self.sim_clock += self.latency_fn(dst, src, rbytes)
        return reply

    def timed(self, epoch, b_idx, phase):
        return _PhaseTimer(self.meter, epoch, b_idx, phase)


class _PhaseTimer:
    def __init__(self, meter, epoch, b_idx, phase):
        self.meter = meter
        self.key = (epoch, b_idx, phase)

    def __enter__(self):
        self.meter.set_phase(*self.key)
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.meter.add_timing(*self.key, time.perf_counter() - self.t0)
        return False
