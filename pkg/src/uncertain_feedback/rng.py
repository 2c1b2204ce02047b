"""Deterministic stream derivation for reproducible experiments.

Every random stream is a Philox counter-based generator keyed by the
SHA-256 digest of a label tuple, so (master_seed, purpose, cell, seed)
always yields the same stream regardless of process, worker count, or
execution order.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np


def stable_digest(*parts) -> int:
    """256-bit integer digest of the canonical JSON of the label tuple."""
    payload = json.dumps(parts, sort_keys=True, separators=(",", ":")).encode()
    return int.from_bytes(hashlib.sha256(payload).digest(), "big")


def derive_rng(*parts) -> np.random.Generator:
    """Philox generator keyed by the label tuple."""
    seq = np.random.SeedSequence(stable_digest(*parts))
    return np.random.Generator(np.random.Philox(seq))
