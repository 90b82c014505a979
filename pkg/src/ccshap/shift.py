"""Shift predictor: a residual MLP mapping (latent, direction spec) to a
counterfactual latent, trained against the world's own classifier.

A direction spec is a ternary vector: +1 push the attribute up, -1 push it
down, 0 leave it unconditioned. The training loss is a per-conditioned-
attribute binary cross-entropy plus gamma times the Euclidean norm of the
latent shift; unconditioned attributes contribute exactly nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, ShapeError, TrainingError
from .mlp import (
    AdamState,
    Layer,
    MlpParams,
    adam_step,
    arrays_to_params,
    as_vector,
    grads_to_arrays,
    mlp_backward,
    mlp_forward,
    new_mlp,
    params_to_arrays,
    sigmoid,
)
from .world import SyntheticWorld, attr_logits, generate

PROBABILITY_CLAMP = 1e-7
DEFAULT_GAMMA = 0.09
DEFAULT_HIDDEN_DIMS = (64, 64)
SHIFT_FORMAT_VERSION = "ccshap-shift/1"


def validate_direction_spec(spec, num_attrs: int) -> np.ndarray:
    """Check a ternary direction vector; every entry must be -1, 0, or +1."""
    arr = as_vector(spec, num_attrs, "direction spec")
    if not np.all(np.isin(arr, (-1.0, 0.0, 1.0))):
        raise ValueError("direction spec entries must be -1, 0, or +1")
    return arr


@dataclass(frozen=True)
class TrainingConfig:
    gamma: float = DEFAULT_GAMMA
    epochs: int = 15000
    batch_size: int = 32
    learning_rate: float = 0.002  # peak rate; training anneals it with a cosine schedule
    conditioning_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0 < self.conditioning_probability <= 1:
            raise ValueError("conditioning_probability must be in (0, 1]")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("invalid training configuration")


@dataclass(frozen=True)
class TrainingInfo:
    gamma: float
    epochs: int
    batch_size: int
    learning_rate: float
    conditioning_probability: float
    seed: int
    final_attr_loss: float | None
    final_shift_loss: float | None


@dataclass(frozen=True)
class ShiftPredictorParams:
    """Residual network: counterfactual latent = latent + net([latent, spec])."""

    net: MlpParams
    latent_dim: int
    num_attrs: int
    residual: bool = True
    training: TrainingInfo | None = None

    def __post_init__(self):
        if not self.residual:
            raise ValueError("only the residual parameterization is supported")
        if self.net.in_dim != self.latent_dim + self.num_attrs:
            raise ShapeError("network input dim must be latent_dim + num_attrs")
        if self.net.out_dim != self.latent_dim:
            raise ShapeError("network output dim must be latent_dim")


def init_shift_predictor(
    latent_dim: int,
    num_attrs: int,
    seed: int,
    hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN_DIMS,
) -> ShiftPredictorParams:
    """Fresh predictor; the final layer starts at zero, so it is the identity map."""
    dims = (latent_dim + num_attrs, *hidden_dims, latent_dim)
    activations = ("tanh",) * len(hidden_dims) + ("identity",)
    net = new_mlp(dims, activations, seed=seed, final_layer_zero=True)
    return ShiftPredictorParams(net=net, latent_dim=latent_dim, num_attrs=num_attrs)


def shift_infer(params: ShiftPredictorParams, z, spec) -> np.ndarray:
    """Counterfactual latent for one latent vector and direction spec."""
    z = as_vector(z, params.latent_dim, "latent")
    spec = validate_direction_spec(spec, params.num_attrs)
    delta, _ = mlp_forward(params.net, np.concatenate([z, spec]))
    return z + delta


def attr_loss_from_probs(probs, spec) -> float:
    """Cross-entropy over the conditioned attributes only.

    spec +1 maps to target 1, -1 to target 0; entries at 0 are excluded from
    the sum entirely, so perturbing their probabilities cannot change the
    result. Probabilities are clamped to [1e-7, 1 - 1e-7].
    """
    probs = np.asarray(probs, dtype=np.float64)
    spec = np.asarray(spec, dtype=np.float64)
    conditioned = spec != 0.0
    if not conditioned.any():
        return 0.0
    y = np.clip(probs[conditioned], PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    t = (spec[conditioned] + 1.0) / 2.0
    return float(-np.sum(t * np.log(y) + (1.0 - t) * np.log(1.0 - y)))


def shift_loss(
    world: SyntheticWorld,
    params: ShiftPredictorParams,
    z,
    spec,
    gamma: float,
) -> tuple[float, tuple[float, float], list[tuple[np.ndarray, np.ndarray]]]:
    """Loss, its (attribute, faithfulness) components, and network gradients.

    attribute term: cross-entropy between the commanded bits and the
    classifier outputs on the counterfactual image, conditioned attributes
    only. faithfulness term: Euclidean norm of the latent shift. Total is
    attribute + gamma * faithfulness. Gradients flow through
    classifier(generator(shift(...))).
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    z = as_vector(z, params.latent_dim, "latent")
    spec = validate_direction_spec(spec, params.num_attrs)

    delta, tape = mlp_forward(params.net, np.concatenate([z, spec]))
    z_hat = z + delta
    x = generate(world, z_hat)
    logits = attr_logits(world, x)
    probs = sigmoid(logits)

    l_attr = attr_loss_from_probs(probs, spec)
    shift_norm = float(np.linalg.norm(delta))
    loss = l_attr + gamma * shift_norm
    if not np.isfinite(loss):
        raise NumericError("shift loss is non-finite")

    # d(attr loss)/d(logit_i) is probs_i - target_i on conditioned attributes
    # (sigmoid/cross-entropy composite; the probability clamp only bites
    # beyond |logit| ~ 16 where the loss is flat anyway).
    conditioned = spec != 0.0
    dlogits = np.where(conditioned, probs - (spec + 1.0) / 2.0, 0.0)
    g_image = world.attr_directions.T @ dlogits
    g_zhat = world.generator_weights.T @ g_image
    if shift_norm > 0.0:
        g_delta = g_zhat + gamma * (delta / shift_norm)
    else:
        g_delta = g_zhat  # norm subgradient at zero taken as zero
    grads, _ = mlp_backward(params.net, tape, g_delta)
    return loss, (l_attr, shift_norm), grads


def sample_direction_spec(rng: np.random.Generator, num_attrs: int, p_cond: float) -> np.ndarray:
    """Training spec: each attribute conditioned independently, all-zero rejected."""
    while True:
        conditioned = rng.random(num_attrs) < p_cond
        if conditioned.any():
            break
    signs = rng.integers(0, 2, size=num_attrs) * 2.0 - 1.0
    return np.where(conditioned, signs, 0.0)


def shift_train(
    world: SyntheticWorld,
    config: TrainingConfig,
    hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN_DIMS,
) -> tuple[ShiftPredictorParams, list[tuple[int, float, float]]]:
    """Train a shift predictor against the world's classifier.

    One epoch is one optimizer step over a freshly sampled batch of
    (latent, spec) pairs. The learning rate follows a cosine anneal from the
    configured peak down to zero; the gating behavior at sparse specs needs
    the small late steps. Returns the trained parameters and the per-epoch
    log of (epoch, mean attribute loss, mean shift norm). Deterministic for
    a fixed (world, config).
    """
    params = init_shift_predictor(world.latent_dim, world.num_attrs, config.seed, hidden_dims)
    rng = np.random.default_rng(config.seed)
    arrays = params_to_arrays(params.net)
    state = AdamState.initial(config.learning_rate, arrays)
    log: list[tuple[int, float, float]] = []

    current = params
    for epoch in range(config.epochs):
        anneal = 0.5 * (1.0 + np.cos(np.pi * epoch / max(config.epochs - 1, 1)))
        state = replace(state, learning_rate=config.learning_rate * anneal)
        grad_sums = [np.zeros_like(a) for a in arrays]
        attr_total = 0.0
        norm_total = 0.0
        for _ in range(config.batch_size):
            z = rng.standard_normal(world.latent_dim)
            spec = sample_direction_spec(rng, world.num_attrs, config.conditioning_probability)
            loss, (l_attr, l_shift), grads = shift_loss(world, current, z, spec, config.gamma)
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            attr_total += l_attr
            norm_total += l_shift
            for acc, g in zip(grad_sums, grads_to_arrays(grads)):
                acc += g
        mean_grads = [g / config.batch_size for g in grad_sums]
        if not all(np.all(np.isfinite(g)) for g in mean_grads):
            raise TrainingError(f"gradient diverged at epoch {epoch}")
        arrays, state = adam_step(state, arrays, mean_grads)
        current = replace(current, net=arrays_to_params(current.net, arrays))
        log.append((epoch, attr_total / config.batch_size, norm_total / config.batch_size))

    info = TrainingInfo(
        gamma=config.gamma,
        epochs=config.epochs,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        conditioning_probability=config.conditioning_probability,
        seed=config.seed,
        final_attr_loss=log[-1][1] if log else None,
        final_shift_loss=log[-1][2] if log else None,
    )
    return replace(current, training=info), log


@dataclass(frozen=True)
class ShiftEvalReport:
    flip_agreement: float
    per_attr_agreement: tuple[float, ...]
    mean_shift_norm: float
    mean_zero_spec_drift: float
    num_samples: int


def eval_shift_predictor(
    world: SyntheticWorld,
    params: ShiftPredictorParams,
    num_samples: int,
    seed: int,
) -> ShiftEvalReport:
    """Held-out metrics: single-attribute flip agreement, shift norms, zero-spec drift.

    A sample agrees when the classifier output for the commanded attribute
    lands on the commanded side of 0.5 after the shift.
    """
    from .world import predict_attrs  # local import keeps module init light

    rng = np.random.default_rng(seed)
    m = world.num_attrs
    agree = np.zeros(m)
    counts = np.zeros(m)
    norms = []
    for s in range(num_samples):
        z = rng.standard_normal(world.latent_dim)
        attr = s % m
        sign = 1.0 if rng.integers(0, 2) else -1.0
        spec = np.zeros(m)
        spec[attr] = sign
        z_hat = shift_infer(params, z, spec)
        prob = predict_attrs(world, generate(world, z_hat))[attr]
        agree[attr] += float((prob > 0.5) == (sign > 0))
        counts[attr] += 1
        norms.append(float(np.linalg.norm(z_hat - z)))

    drifts = []
    zeros = np.zeros(m)
    for _ in range(num_samples):
        z = rng.standard_normal(world.latent_dim)
        drifts.append(float(np.linalg.norm(shift_infer(params, z, zeros) - z)))

    per_attr = tuple(float(a / c) if c else 0.0 for a, c in zip(agree, counts))
    return ShiftEvalReport(
        flip_agreement=float(agree.sum() / counts.sum()),
        per_attr_agreement=per_attr,
        mean_shift_norm=float(np.mean(norms)),
        mean_zero_spec_drift=float(np.mean(drifts)),
        num_samples=num_samples,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def shift_to_dict(params: ShiftPredictorParams) -> dict:
    layers = [
        {
            "in_dim": layer.in_dim,
            "out_dim": layer.out_dim,
            "activation": layer.activation,
            "weights": [float(v) for v in layer.weights.ravel()],
            "bias": [float(v) for v in layer.bias],
        }
        for layer in params.net.layers
    ]
    training = None
    if params.training is not None:
        t = params.training
        training = {
            "gamma": t.gamma,
            "epochs": t.epochs,
            "batch_size": t.batch_size,
            "learning_rate": t.learning_rate,
            "conditioning_probability": t.conditioning_probability,
            "seed": t.seed,
            "final_attr_loss": t.final_attr_loss,
            "final_shift_loss": t.final_shift_loss,
        }
    return {
        "format_version": SHIFT_FORMAT_VERSION,
        "latent_dim": params.latent_dim,
        "num_attrs": params.num_attrs,
        "residual": params.residual,
        "layers": layers,
        "training": training,
    }


def shift_from_dict(data: dict) -> ShiftPredictorParams:
    if data.get("format_version") != SHIFT_FORMAT_VERSION:
        raise ValueError(
            f"unsupported shift-predictor format {data.get('format_version')!r}, "
            f"expected {SHIFT_FORMAT_VERSION}"
        )
    layers = tuple(
        Layer(
            weights=np.array(l["weights"], dtype=np.float64).reshape(l["out_dim"], l["in_dim"]),
            bias=np.array(l["bias"], dtype=np.float64),
            activation=l["activation"],
        )
        for l in data["layers"]
    )
    training = None
    if data.get("training") is not None:
        t = data["training"]
        training = TrainingInfo(
            gamma=float(t["gamma"]),
            epochs=int(t["epochs"]),
            batch_size=int(t["batch_size"]),
            learning_rate=float(t["learning_rate"]),
            conditioning_probability=float(t["conditioning_probability"]),
            seed=int(t["seed"]),
            final_attr_loss=t["final_attr_loss"],
            final_shift_loss=t["final_shift_loss"],
        )
    return ShiftPredictorParams(
        net=MlpParams(layers=layers),
        latent_dim=int(data["latent_dim"]),
        num_attrs=int(data["num_attrs"]),
        residual=bool(data["residual"]),
        training=training,
    )


def save_shift_predictor(params: ShiftPredictorParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(shift_to_dict(params), fh, indent=1)
        fh.write("\n")


def load_shift_predictor(path) -> ShiftPredictorParams:
    with open(path, "r", encoding="utf-8") as fh:
        return shift_from_dict(json.load(fh))
