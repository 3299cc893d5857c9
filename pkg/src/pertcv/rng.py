"""Seeded, stream-splittable random number generation.

All stochastic integrators draw their Gaussian increments from an
:class:`RngStream`, a thin wrapper around numpy's counter-based Philox
generator keyed by ``(seed, stream_id)``.  The same key always yields the
same draws bit-for-bit, on any platform, and distinct stream ids give
statistically independent sequences without any coordination, which is what
makes replica-level parallelism safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream"]


@dataclass(frozen=True)
class RngStream:
    """A reproducible Gaussian stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) < 2**64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value!r}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, stream_id: int) -> "RngStream":
        """Same seed, different stream id (used for replica fan-out)."""
        return RngStream(self.seed, stream_id)
