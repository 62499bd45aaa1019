"""The two sentence classifiers and their checkpoint format.

Word route: embedding feeding three parallel conv branches (kernel widths
3/4/5, 256 frames each), local maxpool(2), a global max over the remaining
time steps, concat to 768 features, then dense 150 -> dense 4 with dropout
in front of both dense layers.

Char route: character embedding feeding a four-conv stack
(256x7 pool 3, 256x3, 256x3, 256x3 pool 3), flatten, then
dense 1024 -> dense 1024 -> dense 4 with dropout in front of the two
hidden dense layers.

Defaults are the full-scale dimensions above; every width is configurable
so the same code runs desk-scale fixtures and gradient checks.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import InputError, QuadcodeError
from .tensor_nn import ops
from .tensor_nn.layers import (
    Conv1d,
    Dense,
    Dropout,
    Embedding,
    Flatten,
    MaxPool1d,
    Parameter,
    PassContext,
    ReLU,
)
from .text_encoding import EncodedExample, encoder_from_json_obj


class InvalidConfigError(InputError):
    def __init__(self, message: str, layer: str | None = None):
        super().__init__(message if layer is None else f"{layer}: {message}")
        self.layer = layer


class CheckpointError(InputError):
    pass


class FormatVersionMismatchError(CheckpointError):
    def __init__(self, got: int, want: int):
        super().__init__(f"checkpoint format version {got}, this build reads {want}")
        self.got = got
        self.want = want


class DigestMismatchError(CheckpointError):
    pass


class ProbeMismatchError(CheckpointError):
    pass


# --- configs ------------------------------------------------------------------


def _positive(name: str, value: int) -> None:
    if value < 1:
        raise InvalidConfigError(f"{name} must be >= 1, got {value}")


@dataclass(frozen=True)
class WordCnnConfig:
    vocab_size: int
    embed_dim: int = 128
    length: int = 64
    frames: int = 256
    kernels: tuple[int, ...] = (3, 4, 5)
    pool: int = 2
    hidden: int = 150
    classes: int = 4
    dropout: float = 0.5
    embeddings_trainable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if len(self.kernels) != 3 or len(set(self.kernels)) != 3:
            raise InvalidConfigError(f"need exactly three distinct kernel widths, got {self.kernels}")
        if self.classes != 4:
            raise InvalidConfigError(f"classifier is four-way, got classes={self.classes}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        for name in ("vocab_size", "embed_dim", "length", "frames", "pool", "hidden"):
            _positive(name, getattr(self, name))
        if self.vocab_size < 2:
            raise InvalidConfigError("vocab_size must cover PAD and UNK (>= 2)")


@dataclass(frozen=True)
class ConvSpec:
    frames: int
    kernel: int
    pool: int | None = None

    def __post_init__(self):
        _positive("frames", self.frames)
        _positive("kernel", self.kernel)
        if self.pool is not None:
            _positive("pool", self.pool)


@dataclass(frozen=True)
class CharCnnConfig:
    alphabet_size: int
    embed_dim: int = 32
    length: int = 512
    convs: tuple[ConvSpec, ...] = (
        ConvSpec(256, 7, 3),
        ConvSpec(256, 3),
        ConvSpec(256, 3),
        ConvSpec(256, 3, 3),
    )
    hidden: tuple[int, ...] = (1024, 1024)
    classes: int = 4
    dropout: float = 0.5
    one_hot: bool = False

    def __post_init__(self):
        object.__setattr__(self, "convs", tuple(self.convs))
        object.__setattr__(self, "hidden", tuple(self.hidden))
        if self.classes != 4:
            raise InvalidConfigError(f"classifier is four-way, got classes={self.classes}")
        if not self.convs:
            raise InvalidConfigError("need at least one conv layer")
        if not self.hidden:
            raise InvalidConfigError("need at least one hidden dense layer")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        for name in ("alphabet_size", "embed_dim", "length"):
            _positive(name, getattr(self, name))
        for h in self.hidden:
            _positive("hidden units", h)
        if self.alphabet_size < 2:
            raise InvalidConfigError("alphabet_size must cover PAD and UNK (>= 2)")
        if self.one_hot and self.embed_dim != self.alphabet_size:
            raise InvalidConfigError(f"one_hot requires embed_dim == alphabet_size ({self.alphabet_size}), got {self.embed_dim}")


def word_branch_lengths(config: WordCnnConfig, kernel: int) -> tuple[int, int]:
    """(conv output length, local-pool output length) for one branch.

    Applies the valid-conv law L-K+1 and the pool law floor(L/p), raising
    with the failing layer's name when a length would drop below 1.
    """
    conv_len = config.length - kernel + 1
    if conv_len < 1:
        raise InvalidConfigError(
            f"output length {conv_len} < 1 for input length {config.length}", layer=f"branch_k{kernel}.conv"
        )
    pool_len = conv_len // config.pool
    if pool_len < 1:
        raise InvalidConfigError(
            f"output length 0 pooling {conv_len} by {config.pool}", layer=f"branch_k{kernel}.pool"
        )
    return conv_len, pool_len


def char_stack_lengths(config: CharCnnConfig) -> list[int]:
    """Output length after each conv (and its pool) in stack order."""
    length = config.length
    lengths = []
    for i, spec in enumerate(config.convs, start=1):
        length = length - spec.kernel + 1
        if length < 1:
            raise InvalidConfigError(
                f"output length {length} < 1 (kernel {spec.kernel} too wide)", layer=f"conv{i}"
            )
        if spec.pool is not None:
            length //= spec.pool
            if length < 1:
                raise InvalidConfigError(
                    f"output length 0 pooling by {spec.pool}", layer=f"conv{i}.pool"
                )
        lengths.append(length)
    return lengths


# --- models -------------------------------------------------------------------


def _run(layers, x, ctx, caches, trace):
    for name, layer in layers:
        x, cache = layer.forward(x, ctx)
        caches.append(cache)
        if trace is not None:
            trace.append((name, tuple(x.shape)))
    return x


def _unwind(layers, caches, grad):
    for (name, layer), cache in zip(reversed(layers), reversed(caches)):
        grad = layer.backward(cache, grad)
    return grad


class WordCnn:
    kind = "word"

    def __init__(self, config: WordCnnConfig, seed: int, embeddings: np.ndarray | None = None):
        self.config = config
        init = rng.stream(seed, rng.INIT)
        if embeddings is None:
            table = rng.stream(seed, rng.EMBED).uniform(-0.25, 0.25, size=(config.vocab_size, config.embed_dim))
        else:
            table = np.asarray(embeddings, dtype=np.float64)
            if table.shape != (config.vocab_size, config.embed_dim):
                raise InvalidConfigError(
                    f"embedding table is {table.shape}, config wants {(config.vocab_size, config.embed_dim)}"
                )
        table = table.copy()
        table[0, :] = 0.0
        self.embedding = Embedding(table, trainable=config.embeddings_trainable)
        self.branches: list[list[tuple[str, object]]] = []
        for kernel in config.kernels:
            _, pool_len = word_branch_lengths(config, kernel)
            prefix = f"branch_k{kernel}"
            self.branches.append([
                (f"{prefix}.conv", Conv1d(config.embed_dim, config.frames, kernel, init, prefix)),
                (f"{prefix}.relu", ReLU()),
                (f"{prefix}.pool", MaxPool1d(config.pool)),
                (f"{prefix}.global_pool", MaxPool1d(pool_len)),
                (f"{prefix}.flatten", Flatten()),
            ])
        concat_width = 3 * config.frames
        self.head: list[tuple[str, object]] = [
            ("dropout1", Dropout(config.dropout)),
            ("fc1", Dense(concat_width, config.hidden, init, "fc1")),
            ("fc1.relu", ReLU()),
            ("dropout2", Dropout(config.dropout)),
            ("fc2", Dense(config.hidden, config.classes, init, "fc2")),
        ]

    def parameters(self) -> list[Parameter]:
        params = list(self.embedding.params)
        for branch in self.branches:
            for _, layer in branch:
                params.extend(layer.params)
        for _, layer in self.head:
            params.extend(layer.params)
        return params

    def forward_logits(self, indices: np.ndarray, ctx: PassContext, trace: list | None = None):
        x, emb_cache = self.embedding.forward(indices, ctx)
        if trace is not None:
            trace.append(("embedding", tuple(x.shape)))
        outputs, branch_caches = [], []
        for branch in self.branches:
            caches: list = []
            outputs.append(_run(branch, x, ctx, caches, trace))
            branch_caches.append(caches)
        feats = ops.concat(outputs)
        if trace is not None:
            trace.append(("concat", tuple(feats.shape)))
        head_caches: list = []
        logits = _run(self.head, feats, ctx, head_caches, trace)
        sizes = [out.shape[0] for out in outputs]
        return logits, (emb_cache, branch_caches, sizes, head_caches)

    def backward_from_logits(self, caches, grad: np.ndarray) -> None:
        emb_cache, branch_caches, sizes, head_caches = caches
        grad = _unwind(self.head, head_caches, grad)
        parts = ops.concat_backward(sizes, grad)
        grad_x = None
        for branch, cache_list, part in zip(self.branches, branch_caches, parts):
            g = _unwind(branch, cache_list, part)
            grad_x = g if grad_x is None else grad_x + g
        self.embedding.backward(emb_cache, grad_x)


class CharCnn:
    kind = "char"

    def __init__(self, config: CharCnnConfig, seed: int):
        self.config = config
        char_stack_lengths(config)  # validates before any allocation
        init = rng.stream(seed, rng.INIT)
        if config.one_hot:
            table = np.eye(config.alphabet_size, dtype=np.float64)
            trainable = False
        else:
            table = rng.stream(seed, rng.EMBED).uniform(
                -0.25, 0.25, size=(config.alphabet_size, config.embed_dim)
            )
            trainable = True
        table[0, :] = 0.0
        self.embedding = Embedding(table, trainable=trainable)
        seq: list[tuple[str, object]] = []
        channels = config.embed_dim
        for i, spec in enumerate(config.convs, start=1):
            seq.append((f"conv{i}", Conv1d(channels, spec.frames, spec.kernel, init, f"conv{i}")))
            seq.append((f"conv{i}.relu", ReLU()))
            if spec.pool is not None:
                seq.append((f"conv{i}.pool", MaxPool1d(spec.pool)))
            channels = spec.frames
        seq.append(("flatten", Flatten()))
        flat = channels * char_stack_lengths(config)[-1]
        width = flat
        for j, units in enumerate(config.hidden, start=1):
            seq.append((f"dropout{j}", Dropout(config.dropout)))
            seq.append((f"fc{j}", Dense(width, units, init, f"fc{j}")))
            seq.append((f"fc{j}.relu", ReLU()))
            width = units
        out_name = f"fc{len(config.hidden) + 1}"
        seq.append((out_name, Dense(width, config.classes, init, out_name)))
        self.seq = seq

    def parameters(self) -> list[Parameter]:
        params = list(self.embedding.params)
        for _, layer in self.seq:
            params.extend(layer.params)
        return params

    def forward_logits(self, indices: np.ndarray, ctx: PassContext, trace: list | None = None):
        x, emb_cache = self.embedding.forward(indices, ctx)
        if trace is not None:
            trace.append(("embedding", tuple(x.shape)))
        caches: list = []
        logits = _run(self.seq, x, ctx, caches, trace)
        return logits, (emb_cache, caches)

    def backward_from_logits(self, caches, grad: np.ndarray) -> None:
        emb_cache, seq_caches = caches
        grad = _unwind(self.seq, seq_caches, grad)
        self.embedding.backward(emb_cache, grad)


Model = WordCnn | CharCnn


def build_word_cnn(config: WordCnnConfig, seed: int = 0, embeddings: np.ndarray | None = None) -> WordCnn:
    return WordCnn(config, seed, embeddings)


def build_char_cnn(config: CharCnnConfig, seed: int = 0) -> CharCnn:
    return CharCnn(config, seed)


def tiny_word_config(vocab_size: int = 50) -> WordCnnConfig:
    """Gradient-check scale: every layer present, every tensor small."""
    return WordCnnConfig(vocab_size=vocab_size, embed_dim=16, length=16, frames=8,
                         kernels=(3, 4, 5), pool=2, hidden=12, dropout=0.5)


def tiny_char_config(alphabet_size: int = 8) -> CharCnnConfig:
    """Same four-conv topology as the full stack, shrunk to length 32.

    The full-scale pools of 3 are narrowed to 2 because kernel 7 plus two
    pool-3 stages needs at least 33 input positions.
    """
    return CharCnnConfig(alphabet_size=alphabet_size, embed_dim=8, length=32,
                         convs=(ConvSpec(6, 7, 2), ConvSpec(6, 3), ConvSpec(6, 3), ConvSpec(6, 3, 2)),
                         hidden=(16, 16), dropout=0.5)


# --- model-level helpers --------------------------------------------------------


def predict(model: Model, indices: np.ndarray) -> tuple[int, np.ndarray]:
    """Evaluation-mode forward: (argmax class, probs). Ties take the lowest index."""
    logits, _ = model.forward_logits(indices, PassContext(training=False))
    probs = ops.softmax(logits)
    return int(np.argmax(probs)), probs


def batch_loss(
    model: Model,
    examples: list[EncodedExample],
    *,
    training: bool = False,
    dropout_rngs: list | None = None,
    accumulate: bool = False,
) -> float:
    """Mean cross entropy over examples, optionally accumulating gradients.

    Examples are processed in list order and gradient contributions are
    scaled by 1/n, so accumulated grads are exactly the mean-loss gradient
    regardless of batch size.
    """
    if not examples:
        raise QuadcodeError("batch_loss needs at least one example")
    n = len(examples)
    total = 0.0
    for j, example in enumerate(examples):
        gen = dropout_rngs[j] if dropout_rngs is not None else None
        ctx = PassContext(training=training, rng=gen)
        logits, caches = model.forward_logits(example.indices, ctx)
        loss, probs = ops.softmax_cross_entropy(logits, example.label)
        total += loss
        if accumulate:
            grad = ops.softmax_cross_entropy_backward(probs, example.label) / n
            model.backward_from_logits(caches, grad)
    return total / n


def shape_trace(model: Model, indices: np.ndarray | None = None) -> list[tuple[str, tuple[int, ...]]]:
    """(layer name, output shape) per layer from an evaluation forward."""
    if indices is None:
        length = model.config.length
        indices = np.zeros(length, dtype=np.int64)
    trace: list[tuple[str, tuple[int, ...]]] = []
    model.forward_logits(indices, PassContext(training=False), trace=trace)
    return trace


def parameter_count(model: Model) -> int:
    return sum(p.size for p in model.parameters())


def make_gradcheck_examples(model: Model, count: int = 2, seed: int = 0) -> list[EncodedExample]:
    """Seeded random inputs for finite-difference checks.

    Indices are drawn from [1, size) so the PAD row, whose value is pinned
    at zero, never influences the loss.
    """
    gen = rng.stream(seed, rng.FIXTURE)
    size = _input_size(model)
    length = model.config.length
    return [
        EncodedExample(gen.integers(1, size, size=length, dtype=np.int64), int(gen.integers(0, 4)))
        for _ in range(count)
    ]


# --- checkpoints -----------------------------------------------------------------
#
# Layout: magic "QCNN" | u32 version | u64 header length | canonical JSON
# header | float64-LE parameter blobs in declaration order | probe inputs
# (int64-LE) | probe logits (float64-LE) | sha256 of everything before it.
# The header carries config, encoder, quad-map digest, and run metadata, so
# a checkpoint alone suffices to restore and verify the model.

_MAGIC = b"QCNN"
_VERSION = 1
_PROBE_COUNT = 4


def _word_config_obj(c: WordCnnConfig) -> dict:
    return {
        "vocab_size": c.vocab_size, "embed_dim": c.embed_dim, "length": c.length,
        "frames": c.frames, "kernels": list(c.kernels), "pool": c.pool,
        "hidden": c.hidden, "classes": c.classes, "dropout": c.dropout,
        "embeddings_trainable": c.embeddings_trainable,
    }


def _char_config_obj(c: CharCnnConfig) -> dict:
    return {
        "alphabet_size": c.alphabet_size, "embed_dim": c.embed_dim, "length": c.length,
        "convs": [[s.frames, s.kernel, s.pool] for s in c.convs],
        "hidden": list(c.hidden), "classes": c.classes, "dropout": c.dropout,
        "one_hot": c.one_hot,
    }


def _config_from_obj(kind: str, obj: dict):
    try:
        if kind == "word":
            return WordCnnConfig(
                vocab_size=obj["vocab_size"], embed_dim=obj["embed_dim"], length=obj["length"],
                frames=obj["frames"], kernels=tuple(obj["kernels"]), pool=obj["pool"],
                hidden=obj["hidden"], classes=obj["classes"], dropout=obj["dropout"],
                embeddings_trainable=obj["embeddings_trainable"],
            )
        if kind == "char":
            return CharCnnConfig(
                alphabet_size=obj["alphabet_size"], embed_dim=obj["embed_dim"], length=obj["length"],
                convs=tuple(ConvSpec(f, k, p) for f, k, p in obj["convs"]),
                hidden=tuple(obj["hidden"]), classes=obj["classes"], dropout=obj["dropout"],
                one_hot=obj["one_hot"],
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad {kind} config in checkpoint header: {exc}") from None
    raise CheckpointError(f"unknown model kind {kind!r}")


def _input_size(model: Model) -> int:
    return model.config.vocab_size if model.kind == "word" else model.config.alphabet_size


def _probe_inputs(model: Model, probe_seed: int) -> np.ndarray:
    gen = rng.stream(probe_seed, rng.PROBE)
    return gen.integers(0, _input_size(model), size=(_PROBE_COUNT, model.config.length), dtype=np.int64)


def save_checkpoint(
    model: Model,
    path: str | Path,
    *,
    encoder=None,
    quad_map_digest: str | None = None,
    metadata: dict | None = None,
    probe_seed: int = 0,
) -> None:
    """Write the binary checkpoint; byte-identical for identical state."""
    params = model.parameters()
    config_obj = _word_config_obj(model.config) if model.kind == "word" else _char_config_obj(model.config)
    probe_in = _probe_inputs(model, probe_seed)
    probe_logits = np.stack([
        model.forward_logits(row, PassContext(training=False))[0] for row in probe_in
    ])
    header = {
        "kind": model.kind,
        "config": config_obj,
        "encoder": None if encoder is None else encoder.to_json_obj(),
        "quadmap_digest": quad_map_digest,
        "metadata": metadata or {},
        "params": [{"name": p.name, "shape": list(p.value.shape)} for p in params],
        "probe": {"count": _PROBE_COUNT, "seed": probe_seed},
    }
    header_bytes = json.dumps(header, ensure_ascii=False, separators=(",", ":"), sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<I", _VERSION)
    blob += struct.pack("<Q", len(header_bytes))
    blob += header_bytes
    for p in params:
        blob += np.ascontiguousarray(p.value, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(probe_in, dtype="<i8").tobytes()
    blob += np.ascontiguousarray(probe_logits, dtype="<f8").tobytes()
    blob += hashlib.sha256(bytes(blob)).digest()
    Path(path).write_bytes(bytes(blob))


@dataclass
class LoadedCheckpoint:
    model: Model
    encoder: object | None
    quad_map_digest: str | None
    metadata: dict
    header: dict = field(repr=False)


def load_checkpoint(path: str | Path, expected_kind: str | None = None) -> LoadedCheckpoint:
    """Restore a model and verify digest plus bit-exact probe predictions."""
    data = Path(path).read_bytes()
    if len(data) < 16 + 32 or data[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad or truncated magic)")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != _VERSION:
        raise FormatVersionMismatchError(version, _VERSION)
    if hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise DigestMismatchError(f"{path}: integrity digest does not match contents")
    header_len = struct.unpack_from("<Q", data, 8)[0]
    offset = 16
    if offset + header_len > len(data) - 32:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from None
    offset += header_len

    kind = header.get("kind")
    if expected_kind is not None and kind != expected_kind:
        raise InvalidConfigError(f"checkpoint holds a {kind!r} model, expected {expected_kind!r}")
    config = _config_from_obj(kind, header.get("config", {}))
    model = WordCnn(config, seed=0) if kind == "word" else CharCnn(config, seed=0)

    params = model.parameters()
    declared = header.get("params", [])
    if len(declared) != len(params):
        raise CheckpointError(f"{path}: header lists {len(declared)} parameters, model has {len(params)}")
    for p, meta in zip(params, declared):
        if meta.get("name") != p.name or tuple(meta.get("shape", ())) != p.value.shape:
            raise CheckpointError(f"{path}: parameter mismatch at {p.name!r} vs header {meta!r}")
        nbytes = p.value.size * 8
        if offset + nbytes > len(data) - 32:
            raise CheckpointError(f"{path}: truncated parameter blob at {p.name!r}")
        p.value[...] = np.frombuffer(data[offset : offset + nbytes], dtype="<f8").reshape(p.value.shape)
        offset += nbytes

    probe = header.get("probe", {})
    count = int(probe.get("count", 0))
    length = model.config.length
    in_bytes = count * length * 8
    logit_bytes = count * model.config.classes * 8
    if offset + in_bytes + logit_bytes != len(data) - 32:
        raise CheckpointError(f"{path}: probe block has wrong size")
    probe_in = np.frombuffer(data[offset : offset + in_bytes], dtype="<i8").reshape(count, length)
    offset += in_bytes
    want = np.frombuffer(data[offset : offset + logit_bytes], dtype="<f8").reshape(count, model.config.classes)
    got = np.stack([model.forward_logits(row, PassContext(training=False))[0] for row in probe_in])
    if not np.array_equal(got, want):
        raise ProbeMismatchError(f"{path}: restored model disagrees with stored probe logits")

    encoder_obj = header.get("encoder")
    encoder = None if encoder_obj is None else encoder_from_json_obj(encoder_obj)
    return LoadedCheckpoint(
        model=model,
        encoder=encoder,
        quad_map_digest=header.get("quadmap_digest"),
        metadata=header.get("metadata", {}),
        header=header,
    )
