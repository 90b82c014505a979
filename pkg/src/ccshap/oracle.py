"""Model-agnostic oracle boundary.

An oracle serves generation, attribute prediction, target prediction, latent
shifts, and the fused value call target(generate(shift(z, spec))). The
in-process oracle wraps a synthetic world directly; the external oracle
drives a subprocess speaking newline-delimited JSON messages on its standard
streams: one complete message per line, fields "id"/"op" plus op-specific
payload, responses {"id", "ok", "result"|"error"}. Floats ride as decimal
literals with shortest round-trip formatting, so values cross the wire
bit-exactly.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ProtocolError, RemoteOracleError, ShapeError
from .mlp import as_vector
from .shift import ShiftPredictorParams, shift_infer, validate_direction_spec
from .world import SyntheticWorld, generate, predict_attrs, predict_target

OPS = ("meta", "generate", "shift", "predict_attrs", "predict_target", "value", "batch", "shutdown")


@dataclass(frozen=True)
class OracleDescriptor:
    latent_dim: int
    image_dim: int
    num_attrs: int
    supports_gradients: bool
    supports_shift: bool
    supports_composite_value: bool

    def __post_init__(self):
        if min(self.latent_dim, self.image_dim, self.num_attrs) < 1:
            raise ValueError("descriptor dimensions must be positive")


@dataclass(frozen=True)
class WireMessage:
    """One request: monotonically increasing id, op name, flat payload fields."""

    id: int
    op: str
    payload: dict

    def to_dict(self) -> dict:
        return {"id": self.id, "op": self.op, **self.payload}


def encode_message(message: dict) -> str:
    """One complete message per newline-terminated line, no pretty-printing."""
    return json.dumps(message, separators=(",", ":"), allow_nan=False) + "\n"


def decode_line(line: str) -> dict:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"unparseable message: {exc}; raw line: {line!r}") from exc
    if not isinstance(data, dict):
        raise ProtocolError(f"message is not an object; raw line: {line!r}")
    return data


class InProcessOracle:
    """Oracle over a synthetic world, with exact per-op call counting."""

    def __init__(self, world: SyntheticWorld, shift_params: ShiftPredictorParams | None = None):
        if shift_params is not None and (
            shift_params.latent_dim != world.latent_dim or shift_params.num_attrs != world.num_attrs
        ):
            raise ShapeError("shift predictor dimensions do not match the world")
        self._world = world
        self._shift_params = shift_params
        self.call_counts: dict[str, int] = {op: 0 for op in OPS}

    @property
    def prediction_calls(self) -> int:
        """Target-model prediction count (direct plus fused value calls)."""
        return self.call_counts["predict_target"] + self.call_counts["value"]

    def meta(self) -> OracleDescriptor:
        self.call_counts["meta"] += 1
        return OracleDescriptor(
            latent_dim=self._world.latent_dim,
            image_dim=self._world.image_dim,
            num_attrs=self._world.num_attrs,
            supports_gradients=True,
            supports_shift=self._shift_params is not None,
            supports_composite_value=True,
        )

    def generate(self, z) -> np.ndarray:
        self.call_counts["generate"] += 1
        return generate(self._world, z)

    def predict_attrs(self, x) -> np.ndarray:
        self.call_counts["predict_attrs"] += 1
        return predict_attrs(self._world, x)

    def predict_target(self, x) -> float:
        self.call_counts["predict_target"] += 1
        return predict_target(self._world, x)

    def shift(self, z, spec) -> np.ndarray:
        self.call_counts["shift"] += 1
        if self._shift_params is None:
            raise ShapeError("no shift predictor attached to this oracle")
        return shift_infer(self._shift_params, z, spec)

    def value(self, z, spec, empty_bypass: bool = True) -> float:
        """target(generate(shift(z, spec))); the empty coalition can bypass the shift."""
        self.call_counts["value"] += 1
        z = as_vector(z, self._world.latent_dim, "latent")
        spec = validate_direction_spec(spec, self._world.num_attrs)
        if empty_bypass and not np.any(spec):
            z_hat = z
        else:
            if self._shift_params is None:
                raise ShapeError("no shift predictor attached to this oracle")
            z_hat = shift_infer(self._shift_params, z, spec)
        return predict_target(self._world, generate(self._world, z_hat))


class ExternalOracle:
    """Client for an external oracle process.

    The command is launched once; requests are written to its stdin and
    responses read from its stdout, one JSON object per line, matched by id.
    Gradients are never served over the wire.
    """

    def __init__(self, command: str | Sequence[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._next_id = 0
        self._meta: OracleDescriptor | None = None
        self.call_counts: dict[str, int] = {op: 0 for op in OPS}

    # -- transport ---------------------------------------------------------

    def _take_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def _roundtrip(self, message: dict) -> dict:
        if self._proc.poll() is not None:
            raise ProtocolError("oracle process has exited")
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(encode_message(message))
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if line == "":
            raise ProtocolError("oracle closed its output stream mid-request")
        return decode_line(line)

    def _check(self, response: dict, request_id: int) -> object:
        if response.get("id") != request_id:
            raise ProtocolError(
                f"response id {response.get('id')!r} does not match request id {request_id}"
            )
        if "ok" not in response:
            raise ProtocolError(f"response missing 'ok' field: {response!r}")
        if not response["ok"]:
            raise RemoteOracleError(str(response.get("error", "unspecified remote failure")))
        if "result" not in response:
            raise ProtocolError(f"successful response missing 'result': {response!r}")
        return response["result"]

    def _request(self, op: str, **payload) -> object:
        request_id = self._take_id()
        self.call_counts[op] = self.call_counts.get(op, 0) + 1
        response = self._roundtrip({"id": request_id, "op": op, **payload})
        return self._check(response, request_id)

    @property
    def prediction_calls(self) -> int:
        return self.call_counts.get("predict_target", 0) + self.call_counts.get("value", 0)

    # -- ops ----------------------------------------------------------------

    def meta(self) -> OracleDescriptor:
        result = self._request("meta")
        if not isinstance(result, dict):
            raise ProtocolError(f"meta result is not an object: {result!r}")
        try:
            descriptor = OracleDescriptor(
                latent_dim=int(result["latent_dim"]),
                image_dim=int(result["image_dim"]),
                num_attrs=int(result["num_attrs"]),
                supports_gradients=False,
                supports_shift=True,
                supports_composite_value=True,
            )
        except KeyError as exc:
            raise ProtocolError(f"meta result missing field {exc}: {result!r}") from exc
        if self._meta is None:
            self._meta = descriptor
        return descriptor

    def _vector_result(self, result: object, name: str) -> np.ndarray:
        if not isinstance(result, list):
            raise ProtocolError(f"{name} result is not an array: {result!r}")
        return np.array(result, dtype=np.float64)

    def generate(self, z) -> np.ndarray:
        result = self._request("generate", z=[float(v) for v in z])
        return self._vector_result(result, "generate")

    def predict_attrs(self, x) -> np.ndarray:
        result = self._request("predict_attrs", x=[float(v) for v in x])
        return self._vector_result(result, "predict_attrs")

    def predict_target(self, x) -> float:
        return float(self._request("predict_target", x=[float(v) for v in x]))  # type: ignore[arg-type]

    def shift(self, z, spec) -> np.ndarray:
        result = self._request("shift", z=[float(v) for v in z], spec=[float(v) for v in spec])
        return self._vector_result(result, "shift")

    def value(self, z, spec, empty_bypass: bool = True) -> float:
        result = self._request(
            "value",
            z=[float(v) for v in z],
            spec=[float(v) for v in spec],
            empty_bypass=bool(empty_bypass),
        )
        return float(result)  # type: ignore[arg-type]

    def batch(self, messages: Sequence[WireMessage]) -> list[object]:
        """Send many requests in one wire message; results in request order.

        Inner ids must be unique; that is checked before anything is sent.
        """
        ids = [msg.id for msg in messages]
        if len(set(ids)) != len(ids):
            raise ProtocolError("duplicate request ids in batch")
        if not messages:
            return []
        batch_id = self._take_id()
        self.call_counts["batch"] += 1
        for msg in messages:
            self.call_counts[msg.op] = self.call_counts.get(msg.op, 0) + 1
        response = self._roundtrip(
            {"id": batch_id, "op": "batch", "requests": [m.to_dict() for m in messages]}
        )
        inner = self._check(response, batch_id)
        if not isinstance(inner, list):
            raise ProtocolError(f"batch result is not an array: {inner!r}")
        by_id: dict[int, dict] = {}
        for item in inner:
            if not isinstance(item, dict) or "id" not in item:
                raise ProtocolError(f"batch item is not a response object: {item!r}")
            if item["id"] in by_id:
                raise ProtocolError(f"duplicate response id {item['id']} in batch")
            by_id[item["id"]] = item
        if set(by_id) != set(ids):
            raise ProtocolError("batch response ids do not match request ids")
        return [self._check(by_id[i], i) for i in ids]

    # -- lifecycle -----------------------------------------------------------

    def shutdown(self) -> None:
        if self._proc.poll() is None:
            try:
                self._request("shutdown")
            except (ProtocolError, RemoteOracleError, BrokenPipeError, OSError):
                pass
        self.close()

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalOracle":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()
