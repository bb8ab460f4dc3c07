"""Reproducible random-number streams.

One RNG algorithm is used repo-wide (numpy's PCG64 seeded through
SeedSequence).  A stream is identified by (seed, stream_id); substreams for
per-unit or per-purpose work are derived by spawn keys so parallel and serial
execution draw identical numbers.
"""

from dataclasses import dataclass
from zlib import crc32

import numpy as np


def _key(k) -> int:
    if isinstance(k, str):
        return crc32(k.encode("utf-8"))
    return int(k)


@dataclass(frozen=True)
class RngSpec:
    """Identifies a reproducible random stream."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not (0 <= int(self.stream_id) < 2**64):
            raise ValueError("stream_id must be a 64-bit unsigned integer")

    def generator(self, *subkeys) -> np.random.Generator:
        """Return a Generator for this stream, optionally keyed by subkeys.

        Subkeys may be ints or strings (e.g. a unit index and a purpose tag);
        distinct subkey tuples give independent substreams.
        """
        ss = np.random.SeedSequence(
            entropy=int(self.seed),
            spawn_key=(int(self.stream_id),) + tuple(_key(k) for k in subkeys),
        )
        return np.random.default_rng(ss)

    def to_dict(self) -> dict:
        return {"seed": int(self.seed), "stream_id": int(self.stream_id)}

    @classmethod
    def from_dict(cls, d: dict) -> "RngSpec":
        return cls(seed=int(d["seed"]), stream_id=int(d.get("stream_id", 0)))
