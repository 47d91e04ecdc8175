"""Seed splitting: every randomized step derives its seed from one root seed."""

from __future__ import annotations

import numpy as np


def split_seed(seed: int | None, count: int) -> list[int]:
    """Derive ``count`` independent 32-bit seeds from ``seed`` via SeedSequence.spawn."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1)[0]) for c in children]
