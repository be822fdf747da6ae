"""Minimal dense-network engine: forward/backward, softmax cross-entropy,
Adam, and seeded Xavier initialization.

Parameters and arithmetic are 64-bit so analytic gradients can be checked
tightly against central finite differences; float32 features are widened
on entry.  Models are values: every update returns a new model.

Model file (PXN1): magic ``PXN1``, u32 layer count, per layer three u32
little-endian fields (in_dim, out_dim, activation code: 0 identity,
1 relu), then all parameters as float64 little-endian in layer order,
weights row-major before biases.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagicError, DataError, TruncatedPayloadError

MODEL_MAGIC = b"PXN1"
_ACTIVATIONS = ("identity", "relu")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}->{self.out_dim}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class MlpModel:
    specs: tuple[LayerSpec, ...]
    weights: tuple[np.ndarray, ...]  # per layer (in_dim, out_dim), float64
    biases: tuple[np.ndarray, ...]  # per layer (out_dim,), float64

    def __post_init__(self) -> None:
        _check_chain(self.specs)
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            if w.shape != (spec.in_dim, spec.out_dim) or b.shape != (spec.out_dim,):
                raise ValueError(f"parameter shapes do not match spec {spec}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("model parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim


@dataclass(frozen=True)
class Activations:
    """Everything forward() saw, recorded for backward()."""

    layer_inputs: tuple[np.ndarray, ...]  # input to each layer
    pre_activations: tuple[np.ndarray, ...]  # x @ W + b per layer
    logits: np.ndarray  # final layer output


@dataclass(frozen=True)
class Gradients:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    input: np.ndarray | None = None  # gradient wrt the network input, for chained nets


@dataclass(frozen=True)
class AdamState:
    step: int
    first_moment: tuple[np.ndarray, ...]  # per parameter tensor, weights then biases
    second_moment: tuple[np.ndarray, ...]
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")


def _check_chain(specs: tuple[LayerSpec, ...]) -> None:
    if not specs:
        raise ValueError("model needs at least one layer")
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise ValueError(f"layer chain mismatch: out_dim {a.out_dim} feeds in_dim {b.in_dim}")


def init_model(specs: list[LayerSpec] | tuple[LayerSpec, ...], seed: int) -> MlpModel:
    """Xavier-uniform weights (bound sqrt(6/(in+out))), zero biases."""
    specs = tuple(specs)
    _check_chain(specs)
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for spec in specs:
        bound = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        weights.append(rng.uniform(-bound, bound, size=(spec.in_dim, spec.out_dim)))
        biases.append(np.zeros(spec.out_dim))
    return MlpModel(specs, tuple(weights), tuple(biases))


def forward(model: MlpModel, x: np.ndarray) -> Activations:
    """Run the network on one vector (D,) or a batch (N, D)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.in_dim:
        raise ValueError(f"input has {x.shape[-1]} channels, model expects {model.in_dim}")
    if not np.isfinite(x).all():
        raise ValueError("input contains NaN or Inf")
    inputs = []
    pre_acts = []
    h = x
    for spec, w, b in zip(model.specs, model.weights, model.biases):
        inputs.append(h)
        z = h @ w + b
        pre_acts.append(z)
        h = np.maximum(z, 0.0) if spec.activation == "relu" else z
    return Activations(tuple(inputs), tuple(pre_acts), h)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probabilities: np.ndarray, target_class: int) -> tuple[float, np.ndarray]:
    """Loss -ln p[target] (log floored at 1e-12) and its gradient wrt logits."""
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("cross_entropy expects a single probability vector")
    if not 0 <= target_class < len(p):
        raise ValueError(f"target class {target_class} out of range 0..{len(p) - 1}")
    loss = -np.log(max(p[target_class], 1e-12))
    grad = p.copy()
    grad[target_class] -= 1.0
    return float(loss), grad


def backward(model: MlpModel, activations: Activations, grad_logits: np.ndarray) -> Gradients:
    """Analytic gradients of a scalar loss wrt every weight and bias.

    For batched activations, per-sample logit gradients are summed, so the
    caller scales them (e.g. by 1/N for a mean loss) before the call.
    """
    g = np.asarray(grad_logits, dtype=np.float64)
    if g.shape != activations.logits.shape:
        raise ValueError(f"grad shape {g.shape} does not match logits {activations.logits.shape}")
    w_grads: list[np.ndarray] = [None] * len(model.specs)  # type: ignore[list-item]
    b_grads: list[np.ndarray] = [None] * len(model.specs)  # type: ignore[list-item]
    for i in reversed(range(len(model.specs))):
        spec = model.specs[i]
        if spec.activation == "relu":
            g = g * (activations.pre_activations[i] > 0.0)
        x = activations.layer_inputs[i]
        if x.ndim == 1:
            w_grads[i] = np.outer(x, g)
            b_grads[i] = g.copy()
        else:
            w_grads[i] = x.T @ g
            b_grads[i] = g.sum(axis=0)
        g = g @ model.weights[i].T
    return Gradients(tuple(w_grads), tuple(b_grads), g)


def init_adam(
    model: MlpModel,
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    zeros = tuple(np.zeros_like(p) for p in (*model.weights, *model.biases))
    return AdamState(0, zeros, tuple(np.zeros_like(z) for z in zeros), learning_rate, beta1, beta2, epsilon)


def adam_step(model: MlpModel, grads: Gradients, state: AdamState) -> tuple[MlpModel, AdamState]:
    """One bias-corrected Adam update; returns the new model and state."""
    params = (*model.weights, *model.biases)
    grad_list = (*grads.weights, *grads.biases)
    t = state.step + 1
    new_params = []
    new_m = []
    new_v = []
    for p, g, m, v in zip(params, grad_list, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        new_params.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    n = len(model.weights)
    new_model = MlpModel(model.specs, tuple(new_params[:n]), tuple(new_params[n:]))
    new_state = AdamState(
        t, tuple(new_m), tuple(new_v), state.learning_rate, state.beta1, state.beta2, state.epsilon
    )
    return new_model, new_state


def encode_model(model: MlpModel) -> bytes:
    blob = bytearray(MODEL_MAGIC)
    blob += struct.pack("<I", len(model.specs))
    for spec in model.specs:
        blob += struct.pack(
            "<III", spec.in_dim, spec.out_dim, _ACTIVATIONS.index(spec.activation)
        )
    for w, b in zip(model.weights, model.biases):
        blob += w.astype("<f8").tobytes()
        blob += b.astype("<f8").tobytes()
    return bytes(blob)


def decode_model(blob: bytes, origin: str = "<bytes>") -> MlpModel:
    if blob[:4] != MODEL_MAGIC:
        raise BadMagicError(f"{origin}: expected magic {MODEL_MAGIC!r}, got {blob[:4]!r}")
    return _decode_model(blob[4:], origin)


def write_model(model: MlpModel, path: str | Path) -> None:
    Path(path).write_bytes(encode_model(model))


def read_model(path: str | Path) -> MlpModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return decode_model(path.read_bytes(), str(path))


def _decode_model(body: bytes, origin: str) -> MlpModel:
    if len(body) < 4:
        raise TruncatedPayloadError(f"{origin}: model header truncated")
    (n_layers,) = struct.unpack_from("<I", body, 0)
    off = 4
    specs = []
    for _ in range(n_layers):
        if off + 12 > len(body):
            raise TruncatedPayloadError(f"{origin}: layer table truncated")
        in_dim, out_dim, code = struct.unpack_from("<III", body, off)
        off += 12
        if code >= len(_ACTIVATIONS):
            raise DataError(f"{origin}: unknown activation code {code}")
        specs.append(LayerSpec(in_dim, out_dim, _ACTIVATIONS[code]))
    weights = []
    biases = []
    for spec in specs:
        n_w = spec.in_dim * spec.out_dim * 8
        n_b = spec.out_dim * 8
        if off + n_w + n_b > len(body):
            raise TruncatedPayloadError(f"{origin}: parameter payload truncated")
        w = np.frombuffer(body, dtype="<f8", count=spec.in_dim * spec.out_dim, offset=off)
        off += n_w
        b = np.frombuffer(body, dtype="<f8", count=spec.out_dim, offset=off)
        off += n_b
        weights.append(w.reshape(spec.in_dim, spec.out_dim).copy())
        biases.append(b.copy())
    if off != len(body):
        raise TruncatedPayloadError(f"{origin}: {len(body) - off} trailing bytes after parameters")
    return MlpModel(tuple(specs), tuple(weights), tuple(biases))
