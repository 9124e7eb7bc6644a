"""Fixed-point codec between real model quantities and signed integers.

The encryption layer only ever sees integers; this codec owns the scaling
and the overflow budget that sizes the discrete-log search bound.
"""

import math
from dataclasses import dataclass

import numpy as np


class EncodeRangeError(OverflowError):
    """Magnitude exceeds the codec's encodable bound."""


@dataclass(frozen=True)
class FixedPointCodec:
    scale: int = 1000
    value_bound: float = 16.0
    max_depth: int = 2

    def __post_init__(self):
        if self.scale < 1 or self.value_bound <= 0:
            raise ValueError("scale must be >= 1 and value bound positive")

    def encode(self, x):
        """round(x * scale), half away from zero."""
        if abs(x) > self.value_bound:
            raise EncodeRangeError(f"|{x}| exceeds encodable bound {self.value_bound}")
        return int(math.copysign(math.floor(abs(x) * self.scale + 0.5), x))

    def encode_vec(self, xs):
        xs = np.asarray(xs, dtype=np.float64)
        if xs.size and np.abs(xs).max() > self.value_bound:
            raise EncodeRangeError(
                f"magnitude {np.abs(xs).max()} exceeds encodable bound {self.value_bound}"
            )
        return np.copysign(np.floor(np.abs(xs) * self.scale + 0.5), xs).astype(np.int64)

    def decode(self, k, depth=1):
        """k / scale**depth; depth counts encoded factors inside the integer."""
        if not 1 <= depth <= self.max_depth:
            raise ValueError(f"depth must be in [1, {self.max_depth}]")
        return float(k) / float(self.scale) ** depth

    def decode_vec(self, ks, depth=1):
        if not 1 <= depth <= self.max_depth:
            raise ValueError(f"depth must be in [1, {self.max_depth}]")
        return np.asarray(ks, dtype=np.float64) / float(self.scale) ** depth

    def dlog_bound_for(self, batch_size, n_parties):
        """Worst-case decrypted magnitude over both aggregation phases.

        Feature dimension sums n encoded scalars; sample dimension sums
        batch_size products of two encoded factors.
        """
        unit = int(math.ceil(self.value_bound * self.scale))
        feature_dim = n_parties * unit
        sample_dim = batch_size * unit * unit
        return max(feature_dim, sample_dim)
