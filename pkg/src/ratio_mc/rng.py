"""Deterministic random number streams.

Streams sit on top of the Philox-4x64 counter-based generator, keyed by the
pair (seed, stream_id).  Distinct pairs select distinct Philox keys, which
gives statistically independent streams by construction, with no sequential
splitting involved; any worker can build its own stream from plain integers.

Uniform doubles take the top 53 bits of a raw 64-bit word and map them into
the open interval (0, 1), so they can never be exactly 0 or 1.  Gaussian
draws apply the inverse normal CDF (``scipy.special.ndtri``) to those
uniforms.  Every draw is therefore a fixed arithmetic function of the raw
bit stream: the same (seed, stream_id) under the same numpy/scipy versions
reproduces bit-identical sequences.
"""

import numpy as np
from scipy.special import ndtri

GENERATOR_ALGORITHM = "philox4x64"
NORMAL_TRANSFORM = "inverse_cdf_ndtri"

_U64_MAX = (1 << 64) - 1
_INV_2_53 = 2.0 ** -53


class RngStream:
    """A single deterministic stream.

    Single-owner: a stream must never be shared across concurrent workers.
    Spawn one stream per worker from the same seed and distinct stream ids
    instead.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not 0 <= seed <= _U64_MAX:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        if not 0 <= stream_id <= _U64_MAX:
            raise ValueError(f"stream_id must fit in 64 unsigned bits, got {stream_id}")
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed, stream_id], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self._gen = np.random.Generator(self._bitgen)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def describe(self) -> dict:
        """Metadata recorded alongside artifacts for reproducibility."""
        return {
            "algorithm": GENERATOR_ALGORITHM,
            "normal_transform": NORMAL_TRANSFORM,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "numpy_version": np.__version__,
        }

    def uniform(self, n: int) -> np.ndarray:
        """n iid doubles uniform on the open interval (0, 1)."""
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return np.empty(0, dtype=np.float64)
        raw = self._bitgen.random_raw(n)
        high = (raw >> np.uint64(11)).astype(np.float64)
        return (high + 0.5) * _INV_2_53

    def standard_normal(self, n: int) -> np.ndarray:
        """n iid N(0, 1) draws via the inverse-CDF transform."""
        if n == 0:
            return np.empty(0, dtype=np.float64)
        return ndtri(self.uniform(n))

    def permutation(self, n: int) -> np.ndarray:
        """A uniformly random permutation of range(n)."""
        return self._gen.permutation(n)
