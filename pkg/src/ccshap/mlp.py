"""Small dense feed-forward networks with hand-derived gradients.

Everything is float64 and operates on 1-d numpy vectors. The backward pass
is exact reverse-mode differentiation of the forward map; no general
autodiff, just the closed-form rules for the three supported activations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

ACTIVATIONS = ("tanh", "sigmoid", "identity")


def sigmoid(t):
    """Numerically stable logistic function, elementwise."""
    t = np.asarray(t, dtype=np.float64)
    s = np.exp(-np.abs(t))
    out = np.where(t >= 0.0, 1.0 / (1.0 + s), s / (1.0 + s))
    return out if out.ndim else float(out)


def as_vector(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Validate and return a finite float64 1-d array."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"{name} must be a non-empty 1-d array, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ShapeError(f"{name} must have length {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Layer:
    """One affine layer followed by an activation. weights is (out_dim, in_dim)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        b = np.ascontiguousarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] == 0 or w.shape[1] == 0:
            raise ShapeError(f"layer weights must be 2-d and non-empty, got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"bias shape {b.shape} does not match weights {w.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NumericError("layer parameters contain non-finite entries")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class MlpParams:
    """A chain of layers; consecutive dimensions must agree."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(
                    f"layer output dim {prev.out_dim} does not chain into input dim {nxt.in_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim


def new_mlp(
    dims: Sequence[int],
    activations: Sequence[str],
    seed: int | None = None,
    final_layer_zero: bool = False,
) -> MlpParams:
    """Create a network with fan-in-scaled random weights and zero biases.

    dims is (input, hidden..., output); activations has len(dims) - 1 entries.
    With final_layer_zero the last layer starts at exactly zero, so the map
    is the zero function regardless of the hidden layers.
    """
    if len(activations) != len(dims) - 1:
        raise ShapeError("need one activation per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for k, act in enumerate(activations):
        fan_in, fan_out = dims[k], dims[k + 1]
        w = rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in)
        if final_layer_zero and k == len(activations) - 1:
            w = np.zeros((fan_out, fan_in))
        layers.append(Layer(weights=w, bias=np.zeros(fan_out), activation=act))
    return MlpParams(layers=tuple(layers))


@dataclass(frozen=True)
class ForwardTape:
    """Per-layer activations recorded by mlp_forward; consumed by mlp_backward."""

    activations: tuple[np.ndarray, ...]  # input, then output of each layer
    layer_shapes: tuple[tuple[int, int], ...]


def _apply_activation(act: str, t: np.ndarray) -> np.ndarray:
    if act == "tanh":
        return np.tanh(t)
    if act == "sigmoid":
        return sigmoid(t)
    return t


def _activation_derivative(act: str, output: np.ndarray) -> np.ndarray:
    # Derivatives expressed through the layer output, which the tape stores.
    if act == "tanh":
        return 1.0 - output * output
    if act == "sigmoid":
        return output * (1.0 - output)
    return np.ones_like(output)


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardTape]:
    """Evaluate the network and record the activations needed for backward."""
    a = as_vector(x, params.in_dim, "input")
    activations = [a]
    for layer in params.layers:
        a = _apply_activation(layer.activation, layer.weights @ a + layer.bias)
        activations.append(a)
    if not np.all(np.isfinite(a)):
        raise NumericError("forward pass produced non-finite output")
    shapes = tuple((l.out_dim, l.in_dim) for l in params.layers)
    return a, ForwardTape(activations=tuple(activations), layer_shapes=shapes)


def mlp_backward(
    params: MlpParams, tape: ForwardTape, output_gradient
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Exact reverse-mode gradients.

    Returns ([(dL/dW, dL/db) per layer], dL/dinput) for the scalar loss whose
    gradient with respect to the network output is output_gradient.
    """
    shapes = tuple((l.out_dim, l.in_dim) for l in params.layers)
    if tape.layer_shapes != shapes or len(tape.activations) != len(params.layers) + 1:
        raise ShapeError("tape does not match these parameters")
    g = as_vector(output_gradient, params.out_dim, "output_gradient")
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)  # type: ignore[list-item]
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        delta = g * _activation_derivative(layer.activation, tape.activations[k + 1])
        grads[k] = (np.outer(delta, tape.activations[k]), delta)
        g = layer.weights.T @ delta
    return grads, g


def finite_difference_gradient(f: Callable[[np.ndarray], float], point, step: float) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = as_vector(point, name="point")
    grad = np.empty_like(x)
    for i in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[i] += step
        backward[i] -= step
        hi, lo = float(f(forward)), float(f(backward))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"function returned a non-finite value near coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# Optimizer: adaptive moment estimation over a flat list of parameter arrays.
# ---------------------------------------------------------------------------

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass(frozen=True)
class AdamState:
    learning_rate: float
    step: int
    first_moments: tuple[np.ndarray, ...]
    second_moments: tuple[np.ndarray, ...]

    @classmethod
    def initial(cls, learning_rate: float, arrays: Sequence[np.ndarray]) -> "AdamState":
        if not learning_rate > 0:
            raise ValueError("learning rate must be positive")
        return cls(
            learning_rate=learning_rate,
            step=0,
            first_moments=tuple(np.zeros_like(a) for a in arrays),
            second_moments=tuple(np.zeros_like(a) for a in arrays),
        )


def adam_step(
    state: AdamState, arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray]
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected update; returns new arrays and the advanced state."""
    if len(arrays) != len(state.first_moments) or len(arrays) != len(grads):
        raise ShapeError("parameter/gradient/state lengths disagree")
    t = state.step + 1
    new_arrays: list[np.ndarray] = []
    new_m: list[np.ndarray] = []
    new_v: list[np.ndarray] = []
    for a, g, m, v in zip(arrays, grads, state.first_moments, state.second_moments):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != a.shape or m.shape != a.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter shape {a.shape}")
        m = BETA1 * m + (1.0 - BETA1) * g
        v = BETA2 * v + (1.0 - BETA2) * (g * g)
        m_hat = m / (1.0 - BETA1**t)
        v_hat = v / (1.0 - BETA2**t)
        new_arrays.append(a - state.learning_rate * m_hat / (np.sqrt(v_hat) + EPSILON))
        new_m.append(m)
        new_v.append(v)
    next_state = AdamState(
        learning_rate=state.learning_rate,
        step=t,
        first_moments=tuple(new_m),
        second_moments=tuple(new_v),
    )
    return new_arrays, next_state


def params_to_arrays(params: MlpParams) -> list[np.ndarray]:
    """Flatten network parameters to [W0, b0, W1, b1, ...]."""
    out: list[np.ndarray] = []
    for layer in params.layers:
        out.append(layer.weights)
        out.append(layer.bias)
    return out


def arrays_to_params(template: MlpParams, arrays: Sequence[np.ndarray]) -> MlpParams:
    """Rebuild an MlpParams from the flat array list produced by params_to_arrays."""
    if len(arrays) != 2 * len(template.layers):
        raise ShapeError("wrong number of arrays for this architecture")
    layers = []
    for k, layer in enumerate(template.layers):
        layers.append(Layer(weights=arrays[2 * k], bias=arrays[2 * k + 1], activation=layer.activation))
    return MlpParams(layers=tuple(layers))


def grads_to_arrays(grads: Sequence[tuple[np.ndarray, np.ndarray]]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for dw, db in grads:
        out.append(dw)
        out.append(db)
    return out
