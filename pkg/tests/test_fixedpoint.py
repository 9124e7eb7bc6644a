import numpy as np
import pytest

from vertfed.fixedpoint import EncodeRangeError, FixedPointCodec


def test_encode_examples():
    assert FixedPointCodec(scale=1000).encode(1.5) == 1500
    assert FixedPointCodec(scale=100).encode(-0.25) == -25
    assert FixedPointCodec(scale=100).encode(0.0) == 0


def test_encode_rounds_half_away_from_zero():
    codec = FixedPointCodec(scale=10)
    assert codec.encode(0.25) == 3
    assert codec.encode(-0.25) == -3
    assert codec.encode(0.24) == 2


def test_encode_overflow():
    codec = FixedPointCodec(scale=10, value_bound=2.0)
    with pytest.raises(EncodeRangeError):
        codec.encode(2.5)
    with pytest.raises(EncodeRangeError):
        codec.encode_vec([0.0, -2.5])


def test_decode_examples():
    codec = FixedPointCodec(scale=1000)
    assert codec.decode(1500, depth=1) == 1.5
    assert codec.decode(0) == 0.0
    two = FixedPointCodec(scale=100)
    k = two.encode(0.5) * two.encode(2.0)
    assert two.decode(k, depth=2) == 1.0


def test_decode_depth_budget():
    codec = FixedPointCodec(scale=10)
    with pytest.raises(ValueError):
        codec.decode(5, depth=3)
    with pytest.raises(ValueError):
        codec.decode(5, depth=0)


def test_integer_roundtrip_exact():
    codec = FixedPointCodec(scale=1000, value_bound=8.0)
    for k in range(-8000, 8001, 97):
        assert codec.encode(codec.decode(k)) == k


def test_quantization_error_bound():
    rng = np.random.default_rng(0)
    for scale in (100, 1000, 10**6):
        codec = FixedPointCodec(scale=scale, value_bound=4.0)
        xs = rng.uniform(-4.0, 4.0, 500)
        err = np.abs(codec.decode_vec(codec.encode_vec(xs)) - xs)
        assert err.max() <= 0.5 / scale + 1e-12


def test_dlog_bound_examples():
    assert FixedPointCodec(scale=10, value_bound=10.0).dlog_bound_for(4, 2) >= 40000
    assert FixedPointCodec(scale=1, value_bound=1.0).dlog_bound_for(1, 1) >= 1
    c = FixedPointCodec(scale=10, value_bound=10.0)
    assert c.dlog_bound_for(8, 2) == 2 * c.dlog_bound_for(4, 2)


def test_dlog_bound_covers_both_phases():
    codec = FixedPointCodec(scale=100, value_bound=2.0)
    unit = 200
    assert codec.dlog_bound_for(3, 5) == max(5 * unit, 3 * unit * unit)
    # feature dim dominates when the batch is tiny and parties are many
    assert FixedPointCodec(scale=1, value_bound=1.0).dlog_bound_for(1, 7) == 7
