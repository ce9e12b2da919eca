"""Shared fixtures for field-level tests."""

import numpy as np

from viscosw.state import PrimitiveState


def random_field(n: int, seed: int = 1) -> PrimitiveState:
    """Smoothly varied admissible field on an ``n x n`` grid."""
    rng = np.random.default_rng(seed)
    shape = (n, n)
    return PrimitiveState(1 + rng.random(shape), rng.normal(size=shape), rng.normal(size=shape),
                          1 + rng.random(shape), 1 + rng.random(shape), 0.3 * rng.uniform(-1, 1, shape),
                          1 + rng.random(shape))


def rotate_field(q: np.ndarray) -> np.ndarray:
    """Conserved field of the configuration rotated by 90 degrees counter-clockwise."""
    r = np.rot90(q).copy()
    out = r.copy()
    out[..., 1] = -r[..., 2]
    out[..., 2] = r[..., 1]
    out[..., 3] = r[..., 4]
    out[..., 4] = r[..., 3]
    out[..., 5] = -r[..., 5]
    return out
