"""Multilayer perceptron definition, initialization and checkpointing.

The parameter state is a flat float64 vector.  Layout: for each layer
(from the first hidden layer to the output layer) the weight matrix in
row-major order, then the biases.  Physical parameters co-trained with
the network (e.g. a friction coefficient) are appended after the last
layer; `param_length` counts network parameters only.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import AdjointRecorder, mlp_apply_jets
from .errors import CheckpointError, ConfigurationError
from .multiindex import JetSpace

_MAGIC = b"CTLPINN1"
_FORMAT_VERSION = 1

_ACTIVATIONS = ("tanh", "sin")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture: layer widths (input, hidden..., output), activation, seed."""

    layer_widths: tuple[int, ...]
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 3:
            raise ConfigurationError("network needs at least one hidden layer")
        if any(w < 1 for w in self.layer_widths):
            raise ConfigurationError("layer widths must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {_ACTIVATIONS}")

    @property
    def n_inputs(self) -> int:
        return self.layer_widths[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_widths[-1]


def param_length(spec: MlpSpec) -> int:
    """Total number of weights and biases for the architecture."""
    widths = spec.layer_widths
    return sum(widths[i] * widths[i + 1] + widths[i + 1] for i in range(len(widths) - 1))


def layer_slices(spec: MlpSpec) -> list[tuple[slice, slice, int, int]]:
    """Per-layer (weight slice, bias slice, fan_in, fan_out) into the flat vector."""
    out = []
    offset = 0
    widths = spec.layer_widths
    for i in range(len(widths) - 1):
        fan_in, fan_out = widths[i], widths[i + 1]
        w = slice(offset, offset + fan_in * fan_out)
        offset = w.stop
        b = slice(offset, offset + fan_out)
        offset = b.stop
        out.append((w, b, fan_in, fan_out))
    return out


def unpack_params(params: np.ndarray, spec: MlpSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of the flat vector as (weight, bias) pairs per layer."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape[0] < param_length(spec):
        raise ConfigurationError(
            f"parameter vector of length {params.shape[0]} is shorter than the "
            f"{param_length(spec)} the architecture needs")
    return [
        (params[w].reshape(fan_out, fan_in), params[b])
        for w, b, fan_in, fan_out in layer_slices(spec)
    ]


def init_params(spec: MlpSpec) -> np.ndarray:
    """Glorot-uniform weights, zero biases; deterministic in the spec seed."""
    rng = np.random.default_rng(spec.seed)
    params = np.zeros(param_length(spec), dtype=np.float64)
    for w, _b, fan_in, fan_out in layer_slices(spec):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params[w] = rng.uniform(-bound, bound, size=fan_in * fan_out)
    return params


def forward(params: np.ndarray, spec: MlpSpec, inputs) -> np.ndarray:
    """Value-only network evaluation.

    `inputs` is (n_inputs,) or (N, n_inputs); output follows suit.  Runs
    the jet pipeline at order 0, so values agree bitwise with the order-0
    coefficients from any jet-order evaluation.
    """
    arr = np.asarray(inputs, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr[None, :] if single else arr
    if pts.shape[1] != spec.n_inputs:
        raise ConfigurationError(
            f"input has {pts.shape[1]} coordinates, network expects {spec.n_inputs}")
    space = JetSpace.full(spec.n_inputs, 0)
    rec = AdjointRecorder()
    layers = [(rec.constant(w), rec.constant(b)) for w, b in unpack_params(params, spec)]
    seeds = rec.constant(space.seed(pts))
    out = mlp_apply_jets(rec, layers, spec.activation, seeds, space)
    values = out.value[:, :, 0]
    return values[0] if single else values


def save_checkpoint(params: np.ndarray, spec: MlpSpec, path, extras: int = 0) -> None:
    """Write a self-describing, bit-exact checkpoint.

    Layout: magic, little-endian u32 JSON header length, JSON header,
    raw little-endian float64 parameter array.  `extras` records how many
    trailing entries are physical parameters rather than network weights.
    """
    params = np.ascontiguousarray(params, dtype=np.float64)
    expected = param_length(spec) + extras
    if params.shape != (expected,):
        raise ConfigurationError(
            f"parameter vector has length {params.shape[0]}, layout expects {expected}")
    header = {
        "format_version": _FORMAT_VERSION,
        "layer_widths": list(spec.layer_widths),
        "activation": spec.activation,
        "seed": spec.seed,
        "extra_params": extras,
        "param_count": int(params.shape[0]),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(params.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[np.ndarray, MlpSpec, int]:
    """Read a checkpoint; returns (params, spec, extra_param_count)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(_MAGIC) + 4 or data[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (hlen,) = struct.unpack_from("<I", data, len(_MAGIC))
    start = len(_MAGIC) + 4
    if len(data) < start + hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    if header.get("format_version") != _FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header.get('format_version')} is not "
            f"{_FORMAT_VERSION}")
    spec = MlpSpec(tuple(header["layer_widths"]), header["activation"], header["seed"])
    extras = int(header.get("extra_params", 0))
    count = int(header["param_count"])
    if count != param_length(spec) + extras:
        raise CheckpointError(f"{path}: header parameter count does not match layout")
    payload = data[start + hlen :]
    if len(payload) != 8 * count:
        raise CheckpointError(
            f"{path}: payload holds {len(payload)} bytes, expected {8 * count}")
    params = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return params, spec, extras
