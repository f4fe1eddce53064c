"""Deterministic seed derivation.

All randomness flows from one root seed; per-stage streams are derived by
hashing ``"<root>/<label>"`` with BLAKE2b, so adding a new stage never
perturbs existing ones and results are stable across platforms.
"""

from __future__ import annotations

import hashlib


def derive_seed(root_seed: int, label: str) -> int:
    """64-bit child seed for a named stream (e.g. ``fold:3``, ``synth``)."""
    payload = f"{int(root_seed)}/{label}".encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "big")
