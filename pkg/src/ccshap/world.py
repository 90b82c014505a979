"""A synthetic, fully differentiable generator / attribute classifier / target stack.

The generator is linear with orthonormal columns and the attribute directions
live inside its column space, so each attribute has an exact latent pullback
direction and the pullbacks are mutually orthonormal: commanding one
attribute need not disturb the others or the target. The target reads only a
declared subset of attributes, which makes the remaining ones genuinely null
players downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, NumericError, ShapeError
from .mlp import as_vector, sigmoid

WORLD_FORMAT_VERSION = "ccshap-world/1"
MIN_SINGULAR_VALUE = 1e-6
TARGET_SENSITIVITY = 0.25
_REDRAW_ATTEMPTS = 10


@dataclass(frozen=True)
class SyntheticWorld:
    latent_dim: int
    image_dim: int
    num_attrs: int
    seed: int
    generator_weights: np.ndarray  # (image_dim, latent_dim)
    attr_directions: np.ndarray  # (num_attrs, image_dim), orthonormal rows
    attr_offsets: np.ndarray  # (num_attrs,)
    target_weights: np.ndarray  # (image_dim,)
    target_offset: float
    relevant_attrs: tuple[int, ...]


@dataclass(frozen=True)
class GroundTruth:
    """Known latent directions behind each attribute, for verification only."""

    latent_directions: np.ndarray  # (num_attrs, latent_dim), orthonormal rows
    relevant_attrs: tuple[int, ...]


def _orthonormalize_rows(rows: np.ndarray, tol: float = 1e-8) -> np.ndarray | None:
    """Gram-Schmidt with unit normalization; None if the rows are near-dependent."""
    out = np.empty_like(rows)
    for i, row in enumerate(rows):
        r = row.copy()
        for j in range(i):
            r -= np.dot(out[j], r) * out[j]
        norm = float(np.linalg.norm(r))
        if norm < tol:
            return None
        out[i] = r / norm
    return out


def create_world(
    latent_dim: int, image_dim: int, num_attrs: int, seed: int
) -> tuple[SyntheticWorld, GroundTruth]:
    """Build a world deterministically from the seed.

    Requires latent_dim >= num_attrs and image_dim >= latent_dim (the
    generator must have full column rank). Roughly half the attributes drive
    the target; the rest are null for it by construction.
    """
    d, n, m = latent_dim, image_dim, num_attrs
    if m < 1:
        raise ValueError("num_attrs must be positive")
    if d < m:
        raise ValueError(f"latent_dim ({d}) must be >= num_attrs ({m})")
    if n < m:
        raise ValueError(f"image_dim ({n}) must be >= num_attrs ({m})")
    if n < d:
        raise ValueError(f"image_dim ({n}) must be >= latent_dim ({d}) for full column rank")

    rng = np.random.default_rng(seed)
    for _ in range(_REDRAW_ATTEMPTS):
        raw = rng.standard_normal((n, d))
        q, r = np.linalg.qr(raw)
        q = q * np.sign(np.diag(r))  # canonical column signs
        if np.linalg.svd(q, compute_uv=False).min() <= MIN_SINGULAR_VALUE:
            continue
        # Attribute rows: random draws projected into the generator's column
        # space, then orthonormalized. Keeping them inside the column space
        # makes the latent pullbacks orthonormal as well.
        projected = rng.standard_normal((m, n)) @ q @ q.T
        attrs = _orthonormalize_rows(projected)
        if attrs is None:
            continue
        break
    else:
        raise ConstructionError(f"could not draw a full-rank world in {_REDRAW_ATTEMPTS} attempts")

    attr_offsets = rng.uniform(-0.5, 0.5, size=m)

    num_relevant = max(1, (m + 1) // 2)
    relevant = tuple(range(num_relevant))
    coeffs = rng.uniform(0.75, 1.25, size=num_relevant) * rng.choice([-1.0, 1.0], size=num_relevant)
    # Prediction-side noise from shift-predictor imprecision scales with the
    # target's latent sensitivity; 0.25 keeps it an order of magnitude below
    # genuine attributions while the predictions still swing visibly.
    coeffs *= TARGET_SENSITIVITY / np.linalg.norm(coeffs)
    target_weights = coeffs @ attrs[list(relevant)]
    target_offset = float(rng.uniform(-0.25, 0.25))

    # Pseudo-inverse pullback of each attribute row; orthonormal columns make
    # the pseudo-inverse the transpose.
    latent_directions = attrs @ q

    world = SyntheticWorld(
        latent_dim=d,
        image_dim=n,
        num_attrs=m,
        seed=seed,
        generator_weights=q,
        attr_directions=attrs,
        attr_offsets=attr_offsets,
        target_weights=target_weights,
        target_offset=target_offset,
        relevant_attrs=relevant,
    )
    return world, GroundTruth(latent_directions=latent_directions, relevant_attrs=relevant)


def generate(world: SyntheticWorld, z) -> np.ndarray:
    """Map a latent vector to an image; linear, Jacobian = generator_weights."""
    z = as_vector(z, world.latent_dim, "latent")
    return world.generator_weights @ z


def attr_logits(world: SyntheticWorld, x) -> np.ndarray:
    x = as_vector(x, world.image_dim, "image")
    return world.attr_directions @ x + world.attr_offsets


def predict_attrs(world: SyntheticWorld, x) -> np.ndarray:
    """Per-attribute probabilities in (0, 1)."""
    return sigmoid(attr_logits(world, x))


def target_logit(world: SyntheticWorld, x) -> float:
    x = as_vector(x, world.image_dim, "image")
    return float(np.dot(world.target_weights, x) + world.target_offset)


def predict_target(world: SyntheticWorld, x) -> float:
    """Scalar target prediction in (0, 1)."""
    value = float(sigmoid(target_logit(world, x)))
    if not np.isfinite(value):
        raise NumericError("target prediction is non-finite")
    return value


# ---------------------------------------------------------------------------
# Serialization: versioned JSON, row-major arrays, bit-exact round-trip.
# ---------------------------------------------------------------------------


def _flat(a: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def world_to_dict(world: SyntheticWorld) -> dict:
    return {
        "format_version": WORLD_FORMAT_VERSION,
        "latent_dim": world.latent_dim,
        "image_dim": world.image_dim,
        "num_attrs": world.num_attrs,
        "seed": world.seed,
        "generator_weights": _flat(world.generator_weights),
        "attr_directions": _flat(world.attr_directions),
        "attr_offsets": _flat(world.attr_offsets),
        "target_weights": _flat(world.target_weights),
        "target_offset": world.target_offset,
        "relevant_attrs": list(world.relevant_attrs),
    }


def world_from_dict(data: dict) -> SyntheticWorld:
    if data.get("format_version") != WORLD_FORMAT_VERSION:
        raise ValueError(
            f"unsupported world format {data.get('format_version')!r}, expected {WORLD_FORMAT_VERSION}"
        )
    d, n, m = int(data["latent_dim"]), int(data["image_dim"]), int(data["num_attrs"])
    world = SyntheticWorld(
        latent_dim=d,
        image_dim=n,
        num_attrs=m,
        seed=int(data["seed"]),
        generator_weights=np.array(data["generator_weights"], dtype=np.float64).reshape(n, d),
        attr_directions=np.array(data["attr_directions"], dtype=np.float64).reshape(m, n),
        attr_offsets=np.array(data["attr_offsets"], dtype=np.float64),
        target_weights=np.array(data["target_weights"], dtype=np.float64),
        target_offset=float(data["target_offset"]),
        relevant_attrs=tuple(int(i) for i in data["relevant_attrs"]),
    )
    if world.attr_offsets.shape != (m,) or world.target_weights.shape != (n,):
        raise ShapeError("world file arrays do not match the declared dimensions")
    return world


def save_world(world: SyntheticWorld, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(world_to_dict(world), fh, indent=1)
        fh.write("\n")


def load_world(path) -> SyntheticWorld:
    with open(path, "r", encoding="utf-8") as fh:
        return world_from_dict(json.load(fh))


def ground_truth_of(world: SyntheticWorld) -> GroundTruth:
    """Recompute the verification directions from the world parameters."""
    pseudo_inverse = np.linalg.pinv(world.generator_weights)
    return GroundTruth(
        latent_directions=world.attr_directions @ pseudo_inverse.T,
        relevant_attrs=world.relevant_attrs,
    )
