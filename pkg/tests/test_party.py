import random

import numpy as np
import pytest

from vertfed import mife, sife
from vertfed.authority import AggregationPolicy, KeyAuthority
from vertfed.fixedpoint import FixedPointCodec
from vertfed.party import BatchError, OtpChain, PartyAgent, PartyShard, ProvisioningError
from vertfed.wire import PartyQuery, PermutationMessage


def test_otp_chain_shared_seed_agreement():
    a = OtpChain(b"shared-seed-0001")
    b = OtpChain(b"shared-seed-0001")
    for epoch, b_idx in ((0, 0), (3, 1), (7, 12)):
        assert np.array_equal(
            a.batch_indices(epoch, b_idx, 6, 40), b.batch_indices(epoch, b_idx, 6, 40)
        )


def test_otp_chain_varies_with_every_component():
    chain = OtpChain(b"seed-A")
    base = list(chain.batch_indices(1, 1, 8, 100))
    assert list(chain.batch_indices(2, 1, 8, 100)) != base
    assert list(chain.batch_indices(1, 2, 8, 100)) != base
    assert list(OtpChain(b"seed-B").batch_indices(1, 1, 8, 100)) != base


def test_otp_chain_distinct_rows_and_full_draw():
    chain = OtpChain(b"x" * 16)
    rows = chain.batch_indices(0, 0, 12, 12)
    assert sorted(rows) == list(range(12))
    rows = chain.batch_indices(5, 9, 20, 50)
    assert len(set(rows)) == 20
    with pytest.raises(BatchError):
        chain.batch_indices(0, 0, 13, 12)


def _make_party(ctx, rnd, *, active, n_rows=20, width=3, n_parties=2, batch_size=4):
    policy = AggregationPolicy(n_parties=n_parties, min_parties=1, batch_size=batch_size)
    auth = KeyAuthority(ctx=ctx, policy=policy, rng=random.Random(3))
    feats = np.random.default_rng(0).uniform(0, 1, (n_rows, width))
    shard = PartyShard(
        party_id=1,
        features=feats,
        col_start=0,
        col_stop=width,
        labels=np.random.default_rng(1).integers(0, 2, n_rows).astype(float) if active else None,
    )
    agent = PartyAgent(shard=shard, codec=FixedPointCodec(scale=1000), rng=rnd)
    agent.install_bundle(auth.party_bundle(1))
    return agent, auth


def test_partial_weight_width_enforced(ctx, rnd):
    agent, _ = _make_party(ctx, rnd, active=False)
    agent.receive_partial_weights([0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        agent.receive_partial_weights([0.1, 0.2])


def test_query_reply_shapes(ctx, rnd):
    agent, _ = _make_party(ctx, rnd, active=False, width=3, batch_size=4)
    q = PartyQuery(
        epoch=0, b_idx=0, batch_size=4, kind="linear_regression",
        mode="linear", w_slice=(0.0, 0.0, 0.0),
    )
    reply = agent.query(q)
    assert len(reply.fd_cts) == 4  # one scalar ciphertext per sample
    assert len(reply.sd_cts) == 3  # one column ciphertext per owned feature
    assert all(ct.eta == 1 for ct in reply.fd_cts)
    assert all(ct.eta == 4 for ct in reply.sd_cts)
    assert reply.labels is None
    assert (reply.epoch, reply.b_idx) == (0, 0)


def test_labels_leave_only_in_nonlinear_mode(ctx, rnd):
    agent, _ = _make_party(ctx, rnd, active=True)
    lin = agent.query(PartyQuery(
        epoch=0, b_idx=0, batch_size=4, kind="linear_regression",
        mode="linear", w_slice=(0.0, 0.0, 0.0),
    ))
    assert lin.labels is None
    nl = agent.query(PartyQuery(
        epoch=0, b_idx=1, batch_size=4, kind="logistic",
        mode="nonlinear", w_slice=(0.0, 0.0, 0.0),
    ))
    assert nl.labels is not None and len(nl.labels) == 4


def test_reply_carries_no_plaintext_features(ctx, rnd):
    """Outbound message schema: ciphertexts plus (optionally) labels only."""
    agent, _ = _make_party(ctx, rnd, active=False)
    reply = agent.query(PartyQuery(
        epoch=0, b_idx=0, batch_size=4, kind="logistic",
        mode="nonlinear", w_slice=(0.5, -0.5, 0.25),
    ))
    payload_fields = set(vars(reply))
    assert payload_fields == {
        "party_id", "epoch", "b_idx", "mode", "fd_cts", "sd_cts", "labels"
    }
    for ct in reply.fd_cts + reply.sd_cts:
        for elem in (getattr(ct, "c0", None),) + tuple(ct.c):
            assert elem is None or isinstance(elem, int)


def test_linear_mode_label_folding(ctx, solver, rnd):
    """With zero weights the active party's submission is exactly -y."""
    agent, auth = _make_party(ctx, rnd, active=True, n_parties=2)
    reply = agent.query(PartyQuery(
        epoch=0, b_idx=0, batch_size=4, kind="linear_regression",
        mode="linear", w_slice=(0.0, 0.0, 0.0),
    ))
    rows = agent.chain.batch_indices(0, 0, 4, 20)
    y = agent.shard.labels[rows]
    dk = mife.dkgen(auth._mife_msk, [1, 0])
    pp, _ = auth.aggregator_params()
    codec = agent.codec
    for k in range(4):
        cts = [reply.fd_cts[k], mife.dummy_ciphertext(2, 1)]
        got = mife.decrypt(pp, cts, dk, [1, 0], 10**5, solver)
        assert codec.decode(got) == pytest.approx(-y[k])


def test_sample_dim_ciphertexts_hold_feature_columns(ctx, solver, rnd):
    agent, auth = _make_party(ctx, rnd, active=False)
    reply = agent.query(PartyQuery(
        epoch=2, b_idx=1, batch_size=4, kind="logistic",
        mode="nonlinear", w_slice=(0.1, 0.2, 0.3),
    ))
    rows = agent.chain.batch_indices(2, 1, 4, 20)
    block = agent.shard.features[rows]
    u = (3, -1, 4, 2)
    key = sife.dkgen(auth._sife_msk, u)
    for j, ct in enumerate(reply.sd_cts):
        got = sife.decrypt(agent.sife_pk, ct, key, u, 10**6, solver)
        want = sum(ui * int(round(x * 1000)) for ui, x in zip(u, block[:, j]))
        assert got == want


def test_query_requires_provisioning(ctx, rnd):
    shard = PartyShard(party_id=1, features=np.ones((4, 2)), col_start=0, col_stop=2)
    agent = PartyAgent(shard=shard, codec=FixedPointCodec(), rng=rnd)
    with pytest.raises(ProvisioningError):
        agent.query(PartyQuery(
            epoch=0, b_idx=0, batch_size=2, kind="logistic",
            mode="nonlinear", w_slice=(0.0, 0.0),
        ))


def test_apply_permutation_reorders_and_drops(ctx, rnd):
    feats = np.arange(10.0).reshape(5, 2)
    shard = PartyShard(
        party_id=1, features=feats, col_start=0, col_stop=2,
        labels=np.array([0.0, 1.0, 0.0, 1.0, 0.0]), ids=list("abcde"),
    )
    agent = PartyAgent(shard=shard, codec=FixedPointCodec(), rng=rnd)
    # aligned order: rows d, a, c; rows b and e unmatched
    msg = PermutationMessage(party_id=1, perm=(1, -1, 2, 0, -1), aligned_count=3)
    agent.apply_permutation(msg)
    assert agent.shard.ids == ["d", "a", "c"]
    assert np.array_equal(agent.shard.features[:, 0], [6.0, 0.0, 4.0])
    assert list(agent.shard.labels) == [1.0, 0.0, 0.0]
