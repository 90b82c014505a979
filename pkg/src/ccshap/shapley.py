"""Cooperative-game core: coalitions, exact and sampled attributions, axiom checks.

Players are indexed 0..m-1 and coalitions are bitmasks, so exact enumeration
is limited to m <= 30. The attribution of player i is the weighted sum of its
marginal contributions over all coalitions that exclude it, with weight
1 / (m * C(m-1, |S|)).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import NumericError

MAX_EXACT_PLAYERS = 30
MAX_DETECTION_PLAYERS = 20
EXACT_COMPARE_TOL = 1e-12


@dataclass(frozen=True)
class Coalition:
    """A subset of players encoded as a bitmask."""

    mask: int
    num_players: int

    def __post_init__(self):
        if not 1 <= self.num_players <= MAX_EXACT_PLAYERS:
            raise ValueError(f"num_players must be in 1..{MAX_EXACT_PLAYERS}")
        if not 0 <= self.mask < (1 << self.num_players):
            raise ValueError(f"mask {self.mask} out of range for {self.num_players} players")

    @classmethod
    def empty(cls, num_players: int) -> "Coalition":
        return cls(0, num_players)

    @classmethod
    def grand(cls, num_players: int) -> "Coalition":
        return cls((1 << num_players) - 1, num_players)

    @classmethod
    def of(cls, members: Sequence[int], num_players: int) -> "Coalition":
        mask = 0
        for i in members:
            mask |= 1 << i
        return cls(mask, num_players)

    def contains(self, player: int) -> bool:
        return bool((self.mask >> player) & 1)

    def add(self, player: int) -> "Coalition":
        return Coalition(self.mask | (1 << player), self.num_players)

    def size(self) -> int:
        return bin(self.mask).count("1")

    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.num_players) if self.contains(i))


@dataclass(frozen=True)
class Game:
    """A characteristic function over coalitions of num_players players."""

    num_players: int
    value: Callable[[Coalition], float]

    @classmethod
    def from_table(cls, table, num_players: int) -> "Game":
        arr = np.ascontiguousarray(table, dtype=np.float64)
        if arr.shape != (1 << num_players,):
            raise ValueError("table length must be 2^num_players")
        return cls(num_players, lambda c: float(arr[c.mask]))


@dataclass(frozen=True)
class Attribution:
    """Per-player attribution plus the empty/grand values it decomposes."""

    phi: np.ndarray
    v_empty: float
    v_grand: float
    method: str  # "exact" | "sampled"
    permutations: int | None = None
    seed: int | None = None

    @property
    def efficiency_residual(self) -> float:
        return abs(float(np.sum(self.phi)) - (self.v_grand - self.v_empty))


def shapley_weight(num_players: int, coalition_size: int) -> float:
    """Weight of a marginal contribution on top of a coalition of the given size."""
    m = num_players
    if m < 1:
        raise ValueError("num_players must be positive")
    if not 0 <= coalition_size <= m - 1:
        raise ValueError(f"coalition_size must be in 0..{m - 1}, got {coalition_size}")
    return 1.0 / (m * comb(m - 1, coalition_size))


def evaluate_table(game: Game) -> np.ndarray:
    """Evaluate the game once per coalition, in ascending mask order."""
    m = game.num_players
    size = 1 << m
    values = np.empty(size, dtype=np.float64)
    for mask in range(size):
        values[mask] = float(game.value(Coalition(mask, m)))
    if not np.all(np.isfinite(values)):
        raise NumericError("game value is non-finite for some coalition")
    return values


def shapley_exact(game: Game) -> Attribution:
    """Exact attribution by full enumeration: 2^m value evaluations, one per coalition."""
    m = game.num_players
    if m > MAX_EXACT_PLAYERS:
        raise ValueError(f"exact enumeration supports at most {MAX_EXACT_PLAYERS} players")
    values = evaluate_table(game)
    phi = kernels.exact_phi_from_table(values, m)
    attribution = Attribution(
        phi=phi, v_empty=float(values[0]), v_grand=float(values[-1]), method="exact"
    )
    scale = max(1.0, float(np.max(np.abs(values))))
    if attribution.efficiency_residual > 1e-9 * scale:
        raise NumericError(
            f"exact attribution violated efficiency (residual {attribution.efficiency_residual:g})"
        )
    return attribution


def exact_phi_reference(values, num_players: int, weight_fn=shapley_weight) -> np.ndarray:
    """Direct per-definition accumulation with a pluggable weight function.

    Slow path used by the axiom self-test, where a deliberately wrong
    weight_fn must surface as an efficiency violation.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    m = num_players
    weights = [weight_fn(m, s) for s in range(m)]
    phi = np.zeros(m, dtype=np.float64)
    for i in range(m):
        bit = 1 << i
        for mask in range(1 << m):
            if mask & bit:
                continue
            phi[i] += weights[bin(mask).count("1")] * (values[mask | bit] - values[mask])
    return phi


def shapley_sampled(game: Game, permutations: int, seed: int) -> Attribution:
    """Permutation-sampling estimator.

    Averages, over uniformly random player orderings, the marginal
    contribution of each player to its predecessors. Unbiased for the exact
    attribution; coalition values are memoized so repeated masks cost one
    oracle call. The efficiency identity holds only up to sampling/rounding;
    the residual is available on the returned attribution.
    """
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    m = game.num_players
    rng = np.random.default_rng(seed)
    memo: dict[int, float] = {}

    def value_of(mask: int) -> float:
        if mask not in memo:
            v = float(game.value(Coalition(mask, m)))
            if not np.isfinite(v):
                raise NumericError(f"game value is non-finite for mask {mask}")
            memo[mask] = v
        return memo[mask]

    contributions = np.zeros(m, dtype=np.float64)
    grand_mask = (1 << m) - 1
    for _ in range(permutations):
        order = rng.permutation(m)
        mask = 0
        previous = value_of(0)
        for player in order:
            mask |= 1 << int(player)
            current = value_of(mask)
            contributions[player] += current - previous
            previous = current
    return Attribution(
        phi=contributions / permutations,
        v_empty=memo[0],
        v_grand=memo[grand_mask],
        method="sampled",
        permutations=permutations,
        seed=seed,
    )


@dataclass(frozen=True)
class AxiomReport:
    """Executable axiom checks for one (game, attribution) pair.

    symmetric_pairs holds (i, j, |phi_i - phi_j|) for every pair found
    exchangeable by exhaustive comparison; null_players holds (i, |phi_i|)
    for every player with zero marginal contribution everywhere. Both are
    None when detection was skipped because the game is too large.
    """

    efficiency_residual: float
    symmetric_pairs: tuple[tuple[int, int, float], ...] | None
    null_players: tuple[tuple[int, float], ...] | None
    detection_skipped: bool


def check_axioms(game: Game, attribution: Attribution) -> AxiomReport:
    """Report efficiency residual and, for m <= 20, detected symmetric/null players."""
    m = game.num_players
    residual = abs(
        float(np.sum(attribution.phi)) - (attribution.v_grand - attribution.v_empty)
    )
    if m > MAX_DETECTION_PLAYERS:
        return AxiomReport(residual, None, None, detection_skipped=True)

    values = evaluate_table(game)
    masks = np.arange(1 << m, dtype=np.int64)

    null_players = []
    for i in range(m):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        if np.max(np.abs(values[without | bit] - values[without])) <= EXACT_COMPARE_TOL:
            null_players.append((i, abs(float(attribution.phi[i]))))

    symmetric_pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            bi, bj = 1 << i, 1 << j
            neither = masks[(masks & (bi | bj)) == 0]
            if np.max(np.abs(values[neither | bi] - values[neither | bj])) <= EXACT_COMPARE_TOL:
                gap = abs(float(attribution.phi[i]) - float(attribution.phi[j]))
                symmetric_pairs.append((i, j, gap))

    return AxiomReport(
        efficiency_residual=residual,
        symmetric_pairs=tuple(symmetric_pairs),
        null_players=tuple(null_players),
        detection_skipped=False,
    )
