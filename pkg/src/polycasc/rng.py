"""Counter-based random streams addressable by (master seed, path).

All randomness in the package flows through these helpers.  A stream is
identified by a master seed plus a path of ints and strings, and the
derivation is a pure function of that tuple.  Replica-parallel code derives
one stream per work chunk, so results do not depend on scheduling, thread
count, or evaluation order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RngPolicy", "derive_seed_sequence", "stream"]

_MASK32 = 0xFFFFFFFF


def _words(element) -> tuple[int, ...]:
    # Type tags keep the int 5 and the string "5" on distinct streams.
    if isinstance(element, bool):
        raise TypeError("bool is ambiguous in a stream path")
    if isinstance(element, (int, np.integer)):
        v = int(element)
        sign = 1 if v < 0 else 0
        v = abs(v)
        out = [0x11, sign, v & _MASK32]
        v >>= 32
        while v:
            out.append(v & _MASK32)
            v >>= 32
        return tuple(out)
    if isinstance(element, str):
        digest = hashlib.sha256(element.encode("utf-8")).digest()
        return (0x22,) + tuple(
            int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)
        )
    raise TypeError(f"unsupported stream path element: {element!r}")


def derive_seed_sequence(master_seed: int, path=()) -> np.random.SeedSequence:
    key: list[int] = []
    for element in path:
        key.extend(_words(element))
    return np.random.SeedSequence(
        entropy=int(master_seed) & (2**64 - 1), spawn_key=tuple(key)
    )


def stream(master_seed: int, *path) -> np.random.Generator:
    """Philox generator for the given derivation path."""
    return np.random.Generator(np.random.Philox(derive_seed_sequence(master_seed, path)))


@dataclass(frozen=True)
class RngPolicy:
    """Master seed plus pure, collision-safe stream derivation by tuple."""

    master_seed: int

    def stream(self, *path) -> np.random.Generator:
        return stream(self.master_seed, *path)

    def subseed(self, *path) -> int:
        """A 64-bit seed for APIs that take a plain integer seed."""
        ss = derive_seed_sequence(self.master_seed, path)
        return int(ss.generate_state(1, np.uint64)[0])
