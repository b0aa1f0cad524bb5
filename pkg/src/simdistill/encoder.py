"""MLP encoders with a projection head emitting unit-norm embeddings.

Layout: input -> hidden trunk (linear+ReLU per width) -> projection head
(one linear layer, or linear-ReLU-linear when head_depth=2; the head's hidden
width equals the last trunk width) -> row-wise l2 normalization.

Checkpoint format: u32 little-endian config-text length, config text (utf-8),
u32 tensor count, per-tensor u32 ndim + u32 dims, then all tensor data as a
little-endian f64 stream. Round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor import DimensionError, Tensor, add, l2_normalize_rows, matmul, relu, transpose

NORM_EPS = 1e-12


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int
    hidden_widths: tuple[int, ...] = ()
    embed_dim: int = 16
    head_depth: int = 2

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        dims = (self.input_dim, self.embed_dim, *self.hidden_widths)
        if any(d < 1 for d in dims):
            raise ValueError(f"all dimensions must be >= 1, got {dims}")
        if self.head_depth not in (1, 2):
            raise ValueError(f"head_depth must be 1 or 2, got {self.head_depth}")

    @property
    def trunk_width(self) -> int:
        """Width of the trunk output (the projection head's input)."""
        return self.hidden_widths[-1] if self.hidden_widths else self.input_dim

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) weight shapes: trunk layers, then head layers."""
        shapes = []
        prev = self.input_dim
        for w in self.hidden_widths:
            shapes.append((w, prev))
            prev = w
        if self.head_depth == 2:
            shapes.append((prev, prev))
        shapes.append((self.embed_dim, prev))
        return shapes


@dataclass
class EncoderParams:
    config: EncoderConfig
    weights: list[Tensor]
    biases: list[Tensor]
    trainable: bool = True

    @property
    def n_trunk_layers(self) -> int:
        return len(self.config.hidden_widths)

    def parameters(self) -> list[Tensor]:
        """All tensors in a fixed order (W0, b0, W1, b1, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def weight_decay_mask(self, decay_biases: bool = True) -> list[float]:
        """Per-parameter multiplier for weight decay (0 exempts biases)."""
        mask = []
        for _ in self.weights:
            mask.extend((1.0, 1.0 if decay_biases else 0.0))
        return mask

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        for t in self.parameters():
            t.requires_grad = trainable

    def copy(self, trainable: bool | None = None) -> "EncoderParams":
        t = self.trainable if trainable is None else trainable
        return EncoderParams(
            config=self.config,
            weights=[Tensor(w.data.copy(), requires_grad=t) for w in self.weights],
            biases=[Tensor(b.data.copy(), requires_grad=t) for b in self.biases],
            trainable=t,
        )


def init_encoder(config: EncoderConfig, seed: int, trainable: bool = True) -> EncoderParams:
    """He-uniform weights (bound sqrt(6/fan_in)), zero biases, deterministic."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for out_dim, in_dim in config.layer_shapes():
        bound = np.sqrt(6.0 / in_dim)
        weights.append(Tensor(rng.uniform(-bound, bound, size=(out_dim, in_dim)), requires_grad=trainable))
        biases.append(Tensor(np.zeros(out_dim), requires_grad=trainable))
    return EncoderParams(config=config, weights=weights, biases=biases, trainable=trainable)


def _forward_trunk(params: EncoderParams, batch: Tensor) -> Tensor:
    if batch.ndim != 2 or batch.shape[1] != params.config.input_dim:
        raise DimensionError(
            f"batch width {batch.shape} does not match input_dim {params.config.input_dim}"
        )
    h = batch
    for i in range(params.n_trunk_layers):
        h = relu(add(matmul(h, transpose(params.weights[i])), params.biases[i]))
    return h


def encode_trunk(params: EncoderParams, batch: Tensor) -> Tensor:
    """Trunk features before the projection head (used by the linear probe)."""
    return _forward_trunk(params, batch)


def encode(params: EncoderParams, batch: Tensor) -> Tensor:
    """Full forward pass: trunk, projection head, l2 row normalization."""
    h = _forward_trunk(params, batch)
    i = params.n_trunk_layers
    if params.config.head_depth == 2:
        h = relu(add(matmul(h, transpose(params.weights[i])), params.biases[i]))
        i += 1
    h = add(matmul(h, transpose(params.weights[i])), params.biases[i])
    return l2_normalize_rows(h, NORM_EPS)


# ---------------------------------------------------------------------------
# checkpoint io


def _config_text(params: EncoderParams) -> str:
    cfg = params.config
    widths = ",".join(str(w) for w in cfg.hidden_widths)
    return (
        f"input_dim={cfg.input_dim}\n"
        f"hidden_widths={widths}\n"
        f"embed_dim={cfg.embed_dim}\n"
        f"head_depth={cfg.head_depth}\n"
        f"trainable={'true' if params.trainable else 'false'}\n"
    )


def _parse_config_text(text: str) -> tuple[EncoderConfig, bool]:
    kv = {}
    for line in text.strip().splitlines():
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    widths = tuple(int(w) for w in kv["hidden_widths"].split(",") if w)
    config = EncoderConfig(
        input_dim=int(kv["input_dim"]),
        hidden_widths=widths,
        embed_dim=int(kv["embed_dim"]),
        head_depth=int(kv["head_depth"]),
    )
    return config, kv["trainable"] == "true"


def save_encoder(params: EncoderParams, path) -> None:
    tensors = [t.data for t in params.parameters()]
    text = _config_text(params).encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<I", len(text)))
        f.write(text)
        f.write(struct.pack("<I", len(tensors)))
        for arr in tensors:
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for arr in tensors:
            f.write(arr.astype("<f8", copy=False).tobytes())


def load_encoder(path) -> EncoderParams:
    raw = Path(path).read_bytes()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(raw):
            raise ValueError(f"truncated checkpoint at byte {off}")
        chunk = raw[off : off + n]
        off += n
        return chunk

    (text_len,) = struct.unpack("<I", take(4))
    config, trainable = _parse_config_text(take(text_len).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    shapes = []
    for _ in range(count):
        (ndim,) = struct.unpack("<I", take(4))
        shapes.append(struct.unpack(f"<{ndim}I", take(4 * ndim)))
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape)) if shape else 1
        arrays.append(np.frombuffer(take(8 * n), dtype="<f8").reshape(shape).astype(np.float64))

    expected = config.layer_shapes()
    if count != 2 * len(expected):
        raise ValueError(f"checkpoint holds {count} tensors, config expects {2 * len(expected)}")
    weights = [Tensor(arrays[2 * i], requires_grad=trainable) for i in range(len(expected))]
    biases = [Tensor(arrays[2 * i + 1], requires_grad=trainable) for i in range(len(expected))]
    for w, (out_dim, in_dim) in zip(weights, expected):
        if w.shape != (out_dim, in_dim):
            raise ValueError(f"checkpoint weight shape {w.shape} != expected {(out_dim, in_dim)}")
    return EncoderParams(config=config, weights=weights, biases=biases, trainable=trainable)
