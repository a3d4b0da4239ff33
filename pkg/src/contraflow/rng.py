"""Labeled seed derivation so every sub-result is independently reproducible."""
from __future__ import annotations

import hashlib


def derive_seed(base: int, *labels: object) -> int:
    """Derive a child seed from a base seed and a label path.

    The derivation is a fixed hash of (base, labels), so the same inputs give
    the same seed on any platform and in any call order.
    """
    h = hashlib.sha256()
    h.update(str(int(base)).encode("utf-8"))
    for label in labels:
        h.update(b"|")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")
