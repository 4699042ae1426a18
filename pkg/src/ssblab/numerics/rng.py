"""Splittable, reproducible random streams on top of Philox."""

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream_id) pair naming one Philox stream.

    The pair is used as the 128-bit Philox key, so each pair addresses an
    independent counter-based sequence. Calling :meth:`generator` twice
    returns two generators replaying the same sequence.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {value}")

    def generator(self) -> np.random.Generator:
        key = (int(self.stream_id) << 64) | int(self.seed)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Derive a sub-stream; distinct indices give distinct streams."""
        ss = np.random.SeedSequence([int(self.seed), int(self.stream_id), int(index)])
        return RngStream(self.seed, int(ss.generate_state(1, dtype=np.uint64)[0]))

    def spawn(self, n: int) -> list:
        return [self.child(i) for i in range(n)]


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a numpy Generator, or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")
