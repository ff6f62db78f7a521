"""Tagger assembly, SGD training, prediction, and the model file codec.

Seven variants share one skeleton: embedding -> optional recurrent stack
-> optional convolution(+relu) -> dense projection -> linear-chain CRF.
Training is per-sentence stochastic gradient descent with global
gradient-norm clipping; the parameters kept at the end are the ones from
the epoch with the best validation weighted F1.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .crf import LinearChainCrf
from .data import TaggedSentence, Vocabulary
from .errors import (
    ConfigError,
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
)
from .evaluate import accumulate_counts, weighted_average
from .layers import Bidirectional, Conv1d, Dense, Embedding, Recurrent, RecurrentCell, Relu

VARIANTS = (
    "crf_only",
    "cnn_crf",
    "rnn_crf",
    "gru_crf",
    "lstm_crf",
    "bigru_crf",
    "bigru_cnn_crf",
)

_CELL_OF = {"rnn_crf": "simple_rnn", "gru_crf": "gru", "lstm_crf": "lstm"}

GRAD_CLIP_NORM = 5.0

MODEL_MAGIC = b"SEQTAG1"
MODEL_FORMAT_VERSION = 1
_CHECKSUM_LEN = 32  # sha256
_HEADER_LEN_BYTES = 8


@dataclass
class ModelConfig:
    variant: str = "bigru_cnn_crf"
    embedding_dim: int = 128
    hidden_dim: int = 128
    learning_rate: float = 0.005
    epochs: int = 20
    seed: int = 0
    kernel_width: int = 3
    conv_channels: int = 128

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}; valid variants: {', '.join(VARIANTS)}"
            )
        for name in ("embedding_dim", "hidden_dim", "conv_channels"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0.0):
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.kernel_width < 1 or self.kernel_width % 2 == 0:
            raise ConfigError(
                f"kernel_width must be odd and positive, got {self.kernel_width}"
            )


@dataclass
class TrainingReport:
    """Per-epoch trace of one training run."""

    epoch_losses: list[float] = field(default_factory=list)
    val_f1: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_f1(self) -> float:
        return self.val_f1[self.best_epoch - 1]


class TaggerModel:
    """One tagger variant plus its vocabulary.

    Layer construction order is fixed, so a given (config, vocab) pair
    always consumes the seeded generator identically and two builds with
    the same seed are bit-identical.
    """

    def __init__(self, config: ModelConfig, vocab: Vocabulary):
        config.validate()
        self.config = config
        self.vocab = vocab
        rng = np.random.default_rng(config.seed)
        d = config.embedding_dim
        h = config.hidden_dim
        k = vocab.num_tags
        variant = config.variant

        self.embedding = Embedding(vocab.num_tokens, d, rng)
        self.recurrent = None
        self.conv = None
        self.relu = None
        feat = d
        if variant in _CELL_OF:
            self.recurrent = Recurrent(RecurrentCell(_CELL_OF[variant], d, h, rng))
            feat = h
        elif variant in ("bigru_crf", "bigru_cnn_crf"):
            self.recurrent = Bidirectional(
                RecurrentCell("gru", d, h, rng), RecurrentCell("gru", d, h, rng)
            )
            feat = 2 * h
        if variant in ("cnn_crf", "bigru_cnn_crf"):
            self.conv = Conv1d(config.kernel_width, feat, config.conv_channels, rng)
            self.relu = Relu()
            feat = config.conv_channels
        self.projection = Dense(feat, k, rng)
        self.crf = LinearChainCrf(k, rng)

    # -- plumbing ---------------------------------------------------------

    def _components(self):
        yield "embedding", self.embedding
        if self.recurrent is not None:
            yield "recurrent", self.recurrent
        if self.conv is not None:
            yield "conv", self.conv
        yield "projection", self.projection
        yield "crf", self.crf

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, layer in self._components():
            for name, value in layer.parameters().items():
                out[f"{prefix}.{name}"] = value
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, layer in self._components():
            for name, value in layer.gradients().items():
                out[f"{prefix}.{name}"] = value
        return out

    def zero_grad(self) -> None:
        for _, layer in self._components():
            layer.zero_grad()

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    # -- forward / backward -------------------------------------------------

    def emissions(self, token_ids) -> np.ndarray:
        """Per-position tag scores for one encoded sentence, shape (T, K)."""
        x = self.embedding.forward(token_ids)
        if self.recurrent is not None:
            x = self.recurrent.forward(x)
        if self.conv is not None:
            x = self.relu.forward(self.conv.forward(x))
        return self.projection.forward(x)

    def backward_from_emissions(self, d_emissions) -> None:
        d = self.projection.backward(d_emissions)
        if self.conv is not None:
            d = self.conv.backward(self.relu.backward(d))
        if self.recurrent is not None:
            d = self.recurrent.backward(d)
        self.embedding.backward(d)

    def loss(self, token_ids, tag_ids) -> float:
        """CRF negative log-likelihood of the gold tags for one sentence."""
        return self.crf.nll_loss(self.emissions(token_ids), tag_ids)

    # -- inference ----------------------------------------------------------

    def predict(self, tokens: list[str]) -> list[str]:
        """Viterbi-decode tag strings for one tokenized sentence."""
        if not tokens:
            raise ValueError("cannot tag an empty sentence")
        ids = self.vocab.encode_tokens(list(tokens))
        path, _ = self.crf.viterbi_decode(self.emissions(ids))
        return self.vocab.decode_tags(path)


def build_model(config: ModelConfig, vocab: Vocabulary) -> TaggerModel:
    return TaggerModel(config, vocab)


# ---------------------------------------------------------------------------
# Training


def _clip_gradients(grads, max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most
    max_norm; returns the pre-clip norm."""
    total = 0.0
    for g in grads:
        flat = g.ravel()
        total += float(flat @ flat)
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm

def train(
    model: TaggerModel,
    train_sentences: list[TaggedSentence],
    val_sentences: list[TaggedSentence],
    on_epoch=None,
) -> TrainingReport:
    """Per-sentence SGD over shuffled epochs.

    Each epoch records the mean training NLL and validation metrics; the
    parameters from the best-validation-F1 epoch (earliest on ties) are
    restored into the model before returning. Encoding happens up front,
    so an unseen tag fails fast as a DataError. ``on_epoch``, when given,
    is called after each epoch with (epoch, mean_loss, val_f1, val_acc).
    """
    if not train_sentences or not val_sentences:
        raise ValueError("training and validation sets must be non-empty")
    cfg = model.config
    vocab = model.vocab
    encoded = [
        (vocab.encode_tokens(s.tokens), vocab.encode_tags(s.tags))
        for s in train_sentences
    ]
    for s in val_sentences:
        vocab.encode_tags(s.tags)
    val_gold = [s.tags for s in val_sentences]

    params = model.parameters()
    grads = model.gradients()
    pairs = [(params[k], grads[k]) for k in params]
    grad_list = [g for _, g in pairs]
    shuffler = random.Random(cfg.seed)
    order = list(range(len(encoded)))

    report = TrainingReport()
    best_f1 = -1.0
    best_params: dict[str, np.ndarray] = {}
    lr = cfg.learning_rate
    for epoch in range(1, cfg.epochs + 1):
        shuffler.shuffle(order)
        total_loss = 0.0
        for idx in order:
            ids, tag_ids = encoded[idx]
            model.zero_grad()
            em = model.emissions(ids)
            loss, d_em = model.crf.backward(em, tag_ids)
            model.backward_from_emissions(d_em)
            _clip_gradients(grad_list, GRAD_CLIP_NORM)
            for p, g in pairs:
                p -= lr * g
            total_loss += loss
        report.epoch_losses.append(total_loss / len(encoded))

        predictions = [model.predict(s.tokens) for s in val_sentences]
        val_report = weighted_average(accumulate_counts(val_gold, predictions))
        report.val_f1.append(val_report.f1)
        report.val_accuracy.append(val_report.accuracy)
        if val_report.f1 > best_f1:
            best_f1 = val_report.f1
            report.best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
        if on_epoch is not None:
            on_epoch(epoch, report.epoch_losses[-1], val_report.f1, val_report.accuracy)

    for k, v in params.items():
        v[...] = best_params[k]
    return report


# ---------------------------------------------------------------------------
# Serialization
#
# Layout: MAGIC(7) VERSION(1) HEADER_LEN(8, big-endian) HEADER(json utf-8)
# ARRAYS(raw little-endian float64, manifest order) SHA256(32).
# The checksum covers everything before it.


def save_model(model: TaggerModel, path) -> Path:
    path = Path(path)
    params = model.parameters()
    header = {
        "config": asdict(model.config),
        "vocab": {"tokens": model.vocab.id_to_token, "tags": model.vocab.id_to_tag},
        "arrays": [
            {"name": name, "shape": list(arr.shape)} for name, arr in params.items()
        ],
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    blob = bytearray()
    blob += MODEL_MAGIC
    blob.append(MODEL_FORMAT_VERSION)
    blob += len(header_bytes).to_bytes(_HEADER_LEN_BYTES, "big")
    blob += header_bytes
    for arr in params.values():
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    blob += hashlib.sha256(blob).digest()
    path.write_bytes(bytes(blob))
    return path


def _parse_header(blob: bytes, arrays_start: int, header_len: int):
    """Header json plus the total size it implies. Assumes the declared
    header bytes are present."""
    header = json.loads(
        blob[arrays_start - header_len:arrays_start].decode("utf-8")
    )
    array_bytes = sum(
        8 * math.prod(entry["shape"]) for entry in header["arrays"]
    )
    return header, arrays_start + array_bytes + _CHECKSUM_LEN


def load_model(path) -> TaggerModel:
    """Rebuild a model from disk, distinguishing failure modes: not a
    model file at all (format), unsupported version, file cut short
    (truncated), and flipped bytes (checksum)."""
    blob = Path(path).read_bytes()
    if blob[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    if len(blob) == len(MODEL_MAGIC):
        raise ModelTruncatedError(f"{path}: file ends after the magic string")
    version = blob[len(MODEL_MAGIC)]
    if version != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"{path}: format version {version}, this reader supports {MODEL_FORMAT_VERSION}"
        )
    prefix_len = len(MODEL_MAGIC) + 1 + _HEADER_LEN_BYTES
    if len(blob) < prefix_len + _CHECKSUM_LEN:
        raise ModelTruncatedError(f"{path}: file shorter than the fixed header")

    header_len = int.from_bytes(
        blob[len(MODEL_MAGIC) + 1:prefix_len], "big"
    )
    arrays_start = prefix_len + header_len
    if arrays_start + _CHECKSUM_LEN > len(blob):
        raise ModelTruncatedError(
            f"{path}: header declares {header_len} bytes, file is too short"
        )
    digest_ok = hashlib.sha256(blob[:-_CHECKSUM_LEN]).digest() == blob[-_CHECKSUM_LEN:]
    try:
        header, expected_total = _parse_header(blob, arrays_start, header_len)
    except Exception:
        # header unreadable: a clean file always carries valid json, so
        # this is corruption unless the digest happens to check out
        if digest_ok:
            raise ModelFormatError(f"{path}: unreadable header") from None
        raise ModelChecksumError(f"{path}: corrupted header") from None
    if len(blob) < expected_total:
        raise ModelTruncatedError(
            f"{path}: expected {expected_total} bytes, found {len(blob)}"
        )
    if len(blob) > expected_total:
        raise ModelFormatError(f"{path}: {len(blob) - expected_total} trailing bytes")
    if not digest_ok:
        raise ModelChecksumError(f"{path}: checksum mismatch")

    try:
        config = ModelConfig(**header["config"])
        vocab = Vocabulary(header["vocab"]["tokens"], header["vocab"]["tags"])
    except TypeError as e:
        raise ModelFormatError(f"{path}: bad config block ({e})") from None
    model = TaggerModel(config, vocab)
    params = model.parameters()
    manifest = header["arrays"]
    if [m["name"] for m in manifest] != list(params):
        raise ModelFormatError(f"{path}: array manifest does not match the variant")
    offset = arrays_start
    for entry in manifest:
        name, shape = entry["name"], tuple(entry["shape"])
        if params[name].shape != shape:
            raise ModelFormatError(
                f"{path}: array {name!r} has shape {shape}, expected {params[name].shape}"
            )
        nbytes = 8 * math.prod(shape)
        arr = np.frombuffer(blob, dtype="<f8", count=math.prod(shape), offset=offset)
        params[name][...] = arr.reshape(shape)
        offset += nbytes
    return model
