"""Order-independent per-sample seeds."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """64-bit seed from the ``|``-joined string forms of ``parts``."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def derive_sample_seed(master_seed: int, task: str, context_s: float, split: str, index: int) -> int:
    return derive_seed(master_seed, task, f"{float(context_s):g}", split, index)
