"""Deterministic sub-seed derivation for independent random streams.

Python's built-in ``hash`` is salted per process, so sub-seeds are derived
through blake2b instead; the same parts always yield the same seed, in any
process, on any platform.
"""

import hashlib


def derive_seed(*parts: object) -> int:
    """Return a stable 64-bit seed mixed from the given parts."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")
