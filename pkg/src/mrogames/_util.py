"""Small shared helpers: seed derivation and float formatting."""

from __future__ import annotations

import hashlib

import numpy as np

PROB_TOL = 1e-12
EVAL_TOL = 1e-9


def stable_seed(*parts: object) -> int:
    """Derive a 63-bit seed from a tuple of ints/strings.

    The derivation is hash-based and stable across processes and platforms,
    so any component can recompute the stream for (base_seed, component,
    index, ...) without coordination.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_for(*parts: object) -> np.random.Generator:
    return np.random.default_rng(stable_seed(*parts))


def fmt_float(x: float) -> str:
    """Format with 12 significant digits (report/CSV precision)."""
    return f"{x + 0.0:.12g}"  # +0.0 canonicalizes negative zero


def fmt_exact(x: float) -> str:
    """Shortest representation that round-trips to the same float."""
    return repr(float(x) + 0.0)
