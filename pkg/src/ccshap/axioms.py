"""Randomized axiom suite over synthetic games.

Games are random value tables; null players and exchangeable pairs are
planted by lifting smaller tables, so the expected attribution behavior is
known exactly. Used by the CLI and the acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .shapley import Attribution, Game, exact_phi_reference, shapley_exact

EFFICIENCY_TOL = 1e-9
NULL_TOL = 1e-12
SYMMETRY_TOL = 1e-9
LINEARITY_TOL = 1e-9


def compress_bit(masks: np.ndarray, bit_index: int) -> np.ndarray:
    """Drop one bit position from each mask, shifting higher bits down."""
    low = masks & ((1 << bit_index) - 1)
    high = (masks >> (bit_index + 1)) << bit_index
    return high | low


def lift_null_player(base_table: np.ndarray, num_players: int, player: int) -> np.ndarray:
    """Table over num_players where `player` never changes the value."""
    masks = np.arange(1 << num_players, dtype=np.int64)
    return base_table[compress_bit(masks, player)]


def lift_symmetric_pair(
    base_table: np.ndarray, num_players: int, i: int, j: int
) -> np.ndarray:
    """Table where the value depends on players i, j only through how many joined.

    base_table has shape (2^(num_players-2), 3), indexed by the reduced mask
    and the count of {i, j} members, so i and j are exchangeable by
    construction.
    """
    assert i < j
    masks = np.arange(1 << num_players, dtype=np.int64)
    count = ((masks >> i) & 1) + ((masks >> j) & 1)
    reduced = compress_bit(compress_bit(masks, j), i)
    return base_table[reduced, count]


@dataclass(frozen=True)
class AxiomSuiteReport:
    games: int
    max_efficiency_residual: float
    max_null_abs: float
    max_symmetry_gap: float
    max_linearity_residual: float

    @property
    def passed(self) -> bool:
        return (
            self.max_efficiency_residual < EFFICIENCY_TOL
            and self.max_null_abs < NULL_TOL
            and self.max_symmetry_gap < SYMMETRY_TOL
            and self.max_linearity_residual < LINEARITY_TOL
        )


def _phi_of_table(table: np.ndarray, m: int, weight_fn) -> np.ndarray:
    if weight_fn is None:
        return kernels.exact_phi_from_table(table, m)
    return exact_phi_reference(table, m, weight_fn)


def run_axiom_suite(
    seed: int,
    m_min: int = 1,
    m_max: int = 10,
    games: int = 1000,
    weight_fn=None,
) -> AxiomSuiteReport:
    """Exercise efficiency, null, symmetry and linearity on random games.

    weight_fn overrides the attribution coefficient (self-test hook: a wrong
    weight function must surface as an efficiency violation).
    """
    rng = np.random.default_rng(seed)
    max_eff = 0.0
    max_null = 0.0
    max_sym = 0.0
    max_lin = 0.0

    for _ in range(games):
        m = int(rng.integers(m_min, m_max + 1))
        size = 1 << m
        table = rng.uniform(size=size)

        phi = _phi_of_table(table, m, weight_fn)
        max_eff = max(max_eff, abs(float(phi.sum()) - float(table[-1] - table[0])))

        other = rng.uniform(size=size)
        phi_other = _phi_of_table(other, m, weight_fn)
        phi_sum = _phi_of_table(table + other, m, weight_fn)
        max_lin = max(max_lin, float(np.max(np.abs(phi_sum - (phi + phi_other)))))

        if m == 1:
            constant = np.full(2, float(rng.uniform()))
            max_null = max(max_null, abs(float(_phi_of_table(constant, 1, weight_fn)[0])))
        else:
            player = int(rng.integers(m))
            null_table = lift_null_player(rng.uniform(size=size // 2), m, player)
            phi_null = _phi_of_table(null_table, m, weight_fn)
            max_null = max(max_null, abs(float(phi_null[player])))

            i, j = sorted(rng.choice(m, size=2, replace=False).tolist())
            base = rng.uniform(size=(max(size // 4, 1), 3))
            sym_table = lift_symmetric_pair(base, m, i, j)
            phi_sym = _phi_of_table(sym_table, m, weight_fn)
            max_sym = max(max_sym, abs(float(phi_sym[i]) - float(phi_sym[j])))

    return AxiomSuiteReport(
        games=games,
        max_efficiency_residual=max_eff,
        max_null_abs=max_null,
        max_symmetry_gap=max_sym,
        max_linearity_residual=max_lin,
    )


def exact_from_table_game(table: np.ndarray, num_players: int) -> Attribution:
    """Exact attribution of a table-backed game through the standard engine."""
    return shapley_exact(Game.from_table(table, num_players))
