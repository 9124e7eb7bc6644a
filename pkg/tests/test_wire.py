import numpy as np
import pytest

from vertfed import mife, sife, wire


def test_sife_ciphertext_roundtrip(ctx, rnd):
    msk = sife.setup(ctx, 6, rnd)
    ct = sife.encrypt(msk.public, [3, -1, 4, 1, -5, 9], rnd)
    blob = wire.sife_ct_to_bytes(ct, ctx.p)
    assert blob[:4] == wire.SIFE_CT_MAGIC
    back = wire.sife_ct_from_bytes(blob)
    assert back == ct


def test_mife_ciphertext_roundtrip(ctx, rnd):
    mk = mife.setup(ctx, [3], rnd)
    ct = mife.encrypt(mife.skdist(mk, 1), [7, -7, 0], rnd)
    blob = wire.mife_ct_to_bytes(ct, ctx.p)
    back = wire.mife_ct_from_bytes(blob)
    assert back == ct
    assert back.slot == 1


def test_ciphertext_bad_magic_rejected(ctx, rnd):
    msk = sife.setup(ctx, 2, rnd)
    blob = wire.sife_ct_to_bytes(sife.encrypt(msk.public, [1, 2], rnd), ctx.p)
    with pytest.raises(ValueError):
        wire.sife_ct_from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(ValueError):
        wire.mife_ct_from_bytes(blob)


def test_party_reply_roundtrip(ctx, rnd):
    mk = mife.setup(ctx, [1, 1], rnd)
    sk = sife.setup(ctx, 4, rnd)
    fd = tuple(mife.encrypt(mife.skdist(mk, 1), [v], rnd) for v in (1, -2, 3, -4))
    sd = tuple(sife.encrypt(sk.public, [1, 2, 3, 4], rnd) for _ in range(2))
    reply = wire.PartyReply(
        party_id=1, epoch=3, b_idx=9, mode="nonlinear",
        fd_cts=fd, sd_cts=sd, labels=np.array([1.0, 0.0, 1.0, 1.0]),
    )
    back = wire.PartyReply.from_bytes(reply.to_bytes(ctx.p))
    assert back.party_id == 1 and back.epoch == 3 and back.b_idx == 9
    assert back.fd_cts == fd and back.sd_cts == sd
    assert np.array_equal(back.labels, reply.labels)
    assert reply.carries_ciphertext


def test_party_query_roundtrip():
    q = wire.PartyQuery(
        epoch=1, b_idx=2, batch_size=8, kind="logistic",
        mode="nonlinear", w_slice=(0.25, -1.5, 3.0),
    )
    back = wire.PartyQuery.from_bytes(q.to_bytes())
    assert back == wire.PartyQuery(
        epoch=1, b_idx=2, batch_size=8, kind="logistic",
        mode="nonlinear", w_slice=(0.25, -1.5, 3.0),
    )
    assert not q.carries_ciphertext


def test_key_request_response_rejection_roundtrip(ctx, rnd):
    req = wire.KeyRequest(scheme="mife", vector=(1, 0, 1))
    assert wire.KeyRequest.from_bytes(req.to_bytes()) == req
    with pytest.raises(ValueError):
        wire.KeyRequest(scheme="paillier", vector=(1,))

    sk = sife.setup(ctx, 3, rnd)
    resp = wire.KeyResponse(scheme="sife", key=sife.dkgen(sk, [1, 2, 3]))
    back = wire.KeyResponse.from_bytes(resp.to_bytes())
    assert back.key == resp.key

    mk = mife.setup(ctx, [1, 1], rnd)
    respm = wire.KeyResponse(scheme="mife", key=mife.dkgen(mk, [1, 1]))
    backm = wire.KeyResponse.from_bytes(respm.to_bytes())
    assert backm.key == respm.key

    rej = wire.Rejection(reason="exploited vector")
    assert wire.Rejection.from_bytes(rej.to_bytes()).reason == "exploited vector"


def test_clk_and_permutation_roundtrip():
    sub = wire.ClkSubmission(party_id=2, bitsets=(0b1011, 0b0010), clk_len=16)
    back = wire.ClkSubmission.from_bytes(sub.to_bytes())
    assert back == sub
    perm = wire.PermutationMessage(party_id=2, perm=(0, -1, 1), aligned_count=2)
    assert wire.PermutationMessage.from_bytes(perm.to_bytes()) == perm
    assert wire.ClkRequest.from_bytes(wire.ClkRequest().to_bytes()) == wire.ClkRequest()
