"""
Seed derivation helpers.

Every random stream in the harness is derived from a master seed plus a
string label, so results never depend on execution order or worker count.
"""
import hashlib

import numpy as np


def label_key(label: str) -> int:
    """Stable 64-bit integer for a string label (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(seed: int, *labels) -> np.random.SeedSequence:
    """SeedSequence for ``seed`` specialised by one or more labels."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF] + [label_key(str(label)) for label in labels])


def derive_rng(seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))


def derive_int(seed: int, *labels) -> int:
    """Child integer seed, for APIs that take plain integers."""
    return int(derive_seed(seed, *labels).generate_state(1, dtype=np.uint32)[0])
