"""Contrastive attribution pipeline.

Players are interpretable attributes. The grand coalition is a full +-1
direction vector; a coalition applies its members' directions and leaves the
rest at 0 (unchanged). The value of a coalition is the target prediction on
the counterfactual produced from that partial spec, except the empty
coalition, which is the target prediction on the original image itself. The
per-attribute attributions then decompose the original-vs-counterfactual
prediction difference.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .mlp import as_vector
from .shapley import Coalition, Game, shapley_exact, shapley_sampled
from .shift import validate_direction_spec

EXPLANATION_FORMAT_VERSION = "ccshap-explanation/1"
MAX_EXACT_EXPLAIN_PLAYERS = 30
RENDER_FORMATS = ("table", "csv", "structured")


def validate_grand_direction(grand, num_attrs: int | None = None) -> np.ndarray:
    """A grand direction is a full command: every entry must be -1 or +1."""
    arr = as_vector(grand, num_attrs, "grand direction")
    if not np.all(np.isin(arr, (-1.0, 1.0))):
        raise ValueError("grand direction entries must be -1 or +1")
    return arr


@dataclass(frozen=True)
class ExplanationRequest:
    latent: np.ndarray
    grand_direction: np.ndarray
    attr_names: tuple[str, ...]
    method: str = "exact"
    permutations: int | None = None
    seed: int | None = None

    def __post_init__(self):
        z = as_vector(self.latent, name="latent")
        grand = validate_grand_direction(self.grand_direction, len(self.attr_names))
        if len(set(self.attr_names)) != len(self.attr_names):
            raise ValueError("attribute names must be unique")
        if not self.attr_names:
            raise ValueError("need at least one attribute")
        if self.method not in ("exact", "sampled"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "sampled":
            if self.permutations is None or self.permutations < 1:
                raise ValueError("sampled method needs a positive permutation count")
            if self.seed is None:
                raise ValueError("sampled method needs a seed")
        object.__setattr__(self, "latent", z)
        object.__setattr__(self, "grand_direction", grand)
        object.__setattr__(self, "attr_names", tuple(self.attr_names))

    @property
    def num_attrs(self) -> int:
        return len(self.attr_names)


@dataclass(frozen=True)
class AttributeRow:
    name: str
    direction: int  # +1 or -1, the commanded change
    shapley_value: float


@dataclass(frozen=True)
class Explanation:
    rows: tuple[AttributeRow, ...]
    original_prediction: float
    counterfactual_prediction: float
    efficiency_residual: float
    oracle_calls: int
    method: str
    permutations: int | None
    seed: int | None
    empty_coalition_prediction_drift: float | None
    empty_coalition_latent_drift: float | None

    @property
    def phi(self) -> np.ndarray:
        return np.array([r.shapley_value for r in self.rows])


class ValueCache:
    """Coalition-mask keyed cache; a stored value never changes."""

    def __init__(self):
        self._values: dict[int, float] = {}

    def __contains__(self, mask: int) -> bool:
        return mask in self._values

    def __len__(self) -> int:
        return len(self._values)

    def get(self, mask: int) -> float:
        return self._values[mask]

    def put(self, mask: int, value: float) -> None:
        if mask in self._values and self._values[mask] != value:
            raise ValueError(f"cache value for mask {mask} changed between evaluations")
        self._values[mask] = value


def coalition_to_spec(coalition: Coalition, grand) -> np.ndarray:
    """Members take their grand-direction entry; everyone else stays at 0."""
    grand = validate_grand_direction(grand)
    if coalition.num_players != grand.shape[0]:
        raise ShapeError(
            f"coalition is over {coalition.num_players} players, direction has {grand.shape[0]}"
        )
    member_bits = (coalition.mask >> np.arange(coalition.num_players)) & 1
    return np.where(member_bits.astype(bool), grand, 0.0)


def contrastive_value(
    oracle,
    z,
    coalition: Coalition,
    grand,
    cache: ValueCache | None = None,
) -> float:
    """Coalition value: target prediction on this coalition's counterfactual.

    The empty coalition is the original image (the shift predictor is
    bypassed); memoized per mask when a cache is supplied.
    """
    if cache is not None and coalition.mask in cache:
        return cache.get(coalition.mask)
    spec = coalition_to_spec(coalition, grand)
    value = float(oracle.value(z, spec, empty_bypass=True))
    if cache is not None:
        cache.put(coalition.mask, value)
    return value


def explain(
    request: ExplanationRequest,
    oracle,
    use_cache: bool = True,
    measure_drift: bool = True,
) -> Explanation:
    """Attribute the original-vs-counterfactual prediction difference.

    Exact enumeration issues one fused value call per coalition (2^m calls,
    the empty one bypassing the shift predictor) plus, when drift is
    measured, one extra call pushing the all-zero spec through the shift
    predictor to expose how far it is from the identity.
    """
    descriptor = oracle.meta()
    m = request.num_attrs
    if descriptor.num_attrs != m:
        raise ShapeError(f"oracle serves {descriptor.num_attrs} attributes, request has {m}")
    z = as_vector(request.latent, descriptor.latent_dim, "latent")
    if request.method == "exact" and m > MAX_EXACT_EXPLAIN_PLAYERS:
        raise ValueError(
            f"exact enumeration refused for {m} attributes (2^{m} evaluations); "
            "use the sampled method"
        )

    cache = ValueCache() if use_cache else None
    grand = request.grand_direction
    calls_before = oracle.prediction_calls
    game = Game(
        num_players=m,
        value=lambda coalition: contrastive_value(oracle, z, coalition, grand, cache),
    )
    if request.method == "exact":
        attribution = shapley_exact(game)
    else:
        attribution = shapley_sampled(game, request.permutations, request.seed)

    prediction_drift = None
    latent_drift = None
    if measure_drift:
        zeros = np.zeros(m)
        no_bypass = float(oracle.value(z, zeros, empty_bypass=False))
        prediction_drift = abs(no_bypass - attribution.v_empty)
        latent_drift = float(np.linalg.norm(np.asarray(oracle.shift(z, zeros)) - z))
    oracle_calls = oracle.prediction_calls - calls_before

    rows = tuple(
        AttributeRow(name=name, direction=int(direction), shapley_value=float(value))
        for name, direction, value in zip(request.attr_names, grand, attribution.phi)
    )
    residual = abs(
        float(np.sum(attribution.phi)) - (attribution.v_grand - attribution.v_empty)
    )
    return Explanation(
        rows=rows,
        original_prediction=attribution.v_empty,
        counterfactual_prediction=attribution.v_grand,
        efficiency_residual=residual,
        oracle_calls=oracle_calls,
        method=request.method,
        permutations=attribution.permutations,
        seed=attribution.seed,
        empty_coalition_prediction_drift=prediction_drift,
        empty_coalition_latent_drift=latent_drift,
    )


@dataclass(frozen=True)
class AuditResult:
    attribution_sum: float
    prediction_difference: float
    residual: float
    tolerance: float
    passed: bool


def efficiency_audit(rows, original: float, counterfactual: float, tolerance: float) -> AuditResult:
    """Check that attributions sum to the prediction difference within tolerance."""
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    total = float(np.sum(np.asarray(rows, dtype=np.float64)))
    difference = counterfactual - original
    residual = abs(total - difference)
    return AuditResult(
        attribution_sum=total,
        prediction_difference=difference,
        residual=residual,
        tolerance=tolerance,
        passed=residual <= tolerance,
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _arrow(direction: int) -> str:
    return "↑" if direction > 0 else "↓"


def format_attribute_line(explanation: Explanation) -> str:
    """One pipe-separated line, values rounded to two decimals."""
    parts = []
    for row in explanation.rows:
        rounded = round(row.shapley_value, 2)
        if rounded == 0:
            rounded = 0.0  # avoid the "-0.00" rendering
        parts.append(f"{row.name} {_arrow(row.direction)} {rounded:.2f}")
    return " | ".join(parts)


def explanation_to_dict(explanation: Explanation) -> dict:
    return {
        "format_version": EXPLANATION_FORMAT_VERSION,
        "attributes": [
            {"name": r.name, "direction": r.direction, "shapley_value": r.shapley_value}
            for r in explanation.rows
        ],
        "original_prediction": explanation.original_prediction,
        "counterfactual_prediction": explanation.counterfactual_prediction,
        "efficiency_residual": explanation.efficiency_residual,
        "oracle_calls": explanation.oracle_calls,
        "method": explanation.method,
        "permutations": explanation.permutations,
        "seed": explanation.seed,
        "empty_coalition_prediction_drift": explanation.empty_coalition_prediction_drift,
        "empty_coalition_latent_drift": explanation.empty_coalition_latent_drift,
    }


def render_explanation(explanation: Explanation, fmt: str = "table") -> str:
    """table: human summary at 2-decimal precision; csv/structured: full precision."""
    if fmt == "table":
        lines = [
            f"method: {explanation.method}"
            + (
                f" ({explanation.permutations} permutations, seed {explanation.seed})"
                if explanation.method == "sampled"
                else ""
            ),
            f"original prediction:       {explanation.original_prediction:.4f}",
            f"counterfactual prediction: {explanation.counterfactual_prediction:.4f}",
            f"difference:                {explanation.counterfactual_prediction - explanation.original_prediction:+.4f}",
            f"efficiency residual:       {explanation.efficiency_residual:.3e}",
            f"oracle calls:              {explanation.oracle_calls}",
        ]
        if explanation.empty_coalition_prediction_drift is not None:
            lines.append(
                "empty-coalition drift:     "
                f"prediction {explanation.empty_coalition_prediction_drift:.3e}, "
                f"latent norm {explanation.empty_coalition_latent_drift:.3e}"
            )
        lines.append(format_attribute_line(explanation))
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["attribute", "direction", "shapley_value"])
        for row in explanation.rows:
            writer.writerow([row.name, row.direction, repr(row.shapley_value)])
        return buf.getvalue()
    if fmt == "structured":
        return json.dumps(explanation_to_dict(explanation), indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected one of {RENDER_FORMATS}")
