"""Deterministic random stream derivation.

Every random draw in the package comes from a generator keyed by a
structured tuple (root seed plus context such as unit index or epoch),
never from global state or scheduling order. This is what makes results
bit-identical across runs and across worker counts.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def _encode(part: int | str) -> int:
    """Map a key part to the non-negative integer entropy SeedSequence needs."""
    if isinstance(part, int):
        # Two's-complement fold so negative seeds are legal and deterministic.
        return part & _MASK64
    if isinstance(part, str):
        return int.from_bytes(part.encode("utf-8"), "big")
    raise TypeError(f"seed key parts must be int or str, got {type(part).__name__}")


def rng_for(*parts: int | str) -> np.random.Generator:
    """Generator for the stream identified by `parts`."""
    return np.random.default_rng(np.random.SeedSequence([_encode(p) for p in parts]))


def derive_seed(*parts: int | str) -> int:
    """Collapse a key to a single integer seed (for handing to a sub-config)."""
    seq = np.random.SeedSequence([_encode(p) for p in parts])
    return int(seq.generate_state(1, np.uint64)[0])
