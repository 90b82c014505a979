"""Pure-numpy implementation of the exact-attribution kernel.

Fallback for the compiled extension; same signature, same results up to
floating-point summation order.
"""

from __future__ import annotations

from math import comb

import numpy as np


def coalition_weights(num_players: int) -> np.ndarray:
    """Weight applied to a marginal contribution on top of a coalition of size s.

    Computed as 1 / (m * C(m-1, s)) instead of the factorial ratio so it stays
    exact in float64 well past 20 players.
    """
    m = num_players
    return np.array([1.0 / (m * comb(m - 1, s)) for s in range(m)], dtype=np.float64)


def popcounts(masks: np.ndarray) -> np.ndarray:
    """Vectorized population count over an unsigned integer array."""
    v = masks.astype(np.uint64)
    m1 = np.uint64(0x5555555555555555)
    m2 = np.uint64(0x3333333333333333)
    m4 = np.uint64(0x0F0F0F0F0F0F0F0F)
    h = np.uint64(0x0101010101010101)
    v = v - ((v >> np.uint64(1)) & m1)
    v = (v & m2) + ((v >> np.uint64(2)) & m2)
    v = (v + (v >> np.uint64(4))) & m4
    return ((v * h) >> np.uint64(56)).astype(np.int64)


def exact_phi_from_table(values, num_players: int) -> np.ndarray:
    """Exact attribution for every player from the full 2^m coalition value table.

    values[mask] is the game value of the coalition whose members are the set
    bits of mask.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    size = 1 << num_players
    if values.shape != (size,):
        raise ValueError(f"value table must have length 2^{num_players}, got {values.shape}")
    masks = np.arange(size, dtype=np.uint64)
    sizes = popcounts(masks)
    weights = coalition_weights(num_players)
    phi = np.empty(num_players, dtype=np.float64)
    for i in range(num_players):
        bit = np.uint64(1 << i)
        without = masks[(masks & bit) == 0]
        gains = values[(without | bit).astype(np.int64)] - values[without.astype(np.int64)]
        phi[i] = np.dot(weights[sizes[without.astype(np.int64)]], gains)
    return phi
