"""Paragraph and word vector training by stochastic gradient descent.

Two architectures are supported. Distributed memory (DM) predicts the center
word of a sliding window from the surrounding words plus a per-paragraph
vector; the hidden layer is either the concatenation of the paragraph vector
with the 2n positional context slots (missing slots padded by a trainable
NULL vector at index 0) or the mean of the paragraph vector and the present
context vectors. Distributed bag of words (DBOW) predicts each window word
from the paragraph vector alone.

Either architecture can be trained against two objectives: negative sampling
(discriminate the target from K draws of the unigram^3/4 noise distribution)
or hierarchical softmax (product of sigmoid decisions along a Huffman-tree
path). An exact softmax over the whole vocabulary is also provided; it is a
desk-scale oracle, not a production training path.

Word vectors live in ``w`` (one row per vocabulary index, row 0 being the
NULL padding vector), output vectors in ``o`` (one row per vocabulary index
for negative sampling, one row per internal tree node for hierarchical
softmax) and paragraph vectors in ``d``. All in-memory math is float64;
model files store matrices as little-endian float32.
"""

from __future__ import annotations

import heapq
import json
import struct
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .corpus import (
    NULL_INDEX,
    NoiseTable,
    Vocabulary,
    build_noise_table,
    discard_table,
)

MAGIC = b"PVEC"
FORMAT_VERSION = 1

# Sigmoid inputs are clamped to this magnitude, following the classic
# word-vector training kernels. Beyond the clamp the returned value differs
# from the true sigmoid by < 2.5e-3, and log-sigmoid terms stay finite.
SIGMOID_CLAMP = 6.0

ARCHITECTURES = ("dm", "dbow")
OBJECTIVES = ("neg", "hs")
COMBINES = ("concat", "mean")


def sigmoid(x):
    """Logistic function with inputs clamped to +-SIGMOID_CLAMP."""
    return 1.0 / (1.0 + np.exp(-np.clip(x, -SIGMOID_CLAMP, SIGMOID_CLAMP)))


def log_sigmoid(x):
    return np.log(sigmoid(x))


@dataclass(frozen=True)
class Hyperparams:
    """Training configuration.

    Defaults follow the best-performing configuration of the sweep harness:
    DM with negative sampling, K=10 noise draws, subsample threshold 1e-6,
    window 10, 100 dimensions, concatenated context, minimum count 5.
    ``combine`` only matters for the DM architecture.
    """

    architecture: str = "dm"
    objective: str = "neg"
    negative: int = 10
    subsample: float = 1e-6
    window: int = 10
    dim: int = 100
    min_count: int = 5
    combine: str = "concat"
    epochs: int = 20
    lr_start: float = 0.025
    lr_end: float = 0.0001
    seed: int = 1

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.combine not in COMBINES:
            raise ValueError(f"combine must be one of {COMBINES}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.objective == "neg" and self.negative < 1:
            raise ValueError("negative sample count must be >= 1 for the neg objective")
        if self.subsample < 0:
            raise ValueError("subsample threshold must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")

    @property
    def hidden_width(self) -> int:
        """Width of the hidden layer the output vectors score against."""
        if self.architecture == "dm" and self.combine == "concat":
            return (2 * self.window + 1) * self.dim
        return self.dim


@dataclass
class HuffmanTree:
    """Binary code tree over vocabulary counts.

    ``codes[i]`` and ``paths[i]`` give, for token index i, the branch bits and
    the internal-node ids on the root-to-leaf walk. A vocabulary of n tokens
    yields n - 1 internal nodes; a single-token vocabulary has none and its
    leaf probability is the empty product 1.
    """

    codes: list[np.ndarray]
    paths: list[np.ndarray]
    num_internal: int

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "HuffmanTree":
        n = len(counts) - 1
        if n < 1:
            raise ValueError("cannot build a code tree over an empty vocabulary")
        # Heap entries carry an insertion counter so ties break deterministically.
        heap: list[tuple[int, int, dict]] = []
        for idx in range(1, n + 1):
            heap.append((int(counts[idx]), idx, {"leaf": idx}))
        heapq.heapify(heap)
        tick = n + 1
        next_internal = 0
        root = heap[0][2]
        while len(heap) > 1:
            c0, _, left = heapq.heappop(heap)
            c1, _, right = heapq.heappop(heap)
            node = {"id": next_internal, "left": left, "right": right}
            next_internal += 1
            root = node
            heapq.heappush(heap, (c0 + c1, tick, node))
            tick += 1

        codes: list[np.ndarray] = [np.zeros(0, dtype=np.uint8) for _ in range(n + 1)]
        paths: list[np.ndarray] = [np.zeros(0, dtype=np.int64) for _ in range(n + 1)]
        stack = [(root, [], [])]
        while stack:
            node, bits, ids = stack.pop()
            if "leaf" in node:
                codes[node["leaf"]] = np.array(bits, dtype=np.uint8)
                paths[node["leaf"]] = np.array(ids, dtype=np.int64)
                continue
            stack.append((node["left"], bits + [0], ids + [node["id"]]))
            stack.append((node["right"], bits + [1], ids + [node["id"]]))
        return cls(codes, paths, next_internal)


@dataclass
class EmbeddingModel:
    """Word matrix, output matrix and paragraph matrix plus their recipe."""

    hp: Hyperparams
    vocab: Vocabulary
    w: np.ndarray
    o: np.ndarray
    d: np.ndarray
    huffman: HuffmanTree | None = None

    @property
    def num_paragraphs(self) -> int:
        return self.d.shape[0]


@dataclass(frozen=True)
class ContextSample:
    """One training observation: a target token, its window and its paragraph.

    For the DM architecture ``context`` holds the 2*window positional slots
    around the target in order, with NULL_INDEX filling positions that fall
    outside the paragraph; the target position itself is excluded. DBOW
    samples carry an empty context.
    """

    target: int
    context: np.ndarray
    doc: int


def init_model(vocab: Vocabulary, num_paragraphs: int, hp: Hyperparams) -> EmbeddingModel:
    """Seeded initialization: W and D uniform in [-0.5/dim, 0.5/dim], O zero."""
    if vocab.size == 0:
        raise ValueError("cannot initialize a model over an empty vocabulary")
    if num_paragraphs < 0:
        raise ValueError("num_paragraphs must be >= 0")
    rng = np.random.default_rng([hp.seed, 0])
    bound = 0.5 / hp.dim
    w = rng.uniform(-bound, bound, size=(vocab.size + 1, hp.dim))
    d = rng.uniform(-bound, bound, size=(num_paragraphs, hp.dim))
    huffman = None
    if hp.objective == "hs":
        huffman = HuffmanTree.from_counts(vocab.counts)
        o = np.zeros((huffman.num_internal, hp.hidden_width))
    else:
        o = np.zeros((vocab.size + 1, hp.hidden_width))
    return EmbeddingModel(hp=hp, vocab=vocab, w=w, o=o, d=d, huffman=huffman)


def make_context(tokens: Sequence[int], position: int, window: int) -> np.ndarray:
    """Positional context slots around ``position``, NULL-padded at the edges."""
    tokens = np.asarray(tokens, dtype=np.int64)
    out = np.full(2 * window, NULL_INDEX, dtype=np.int64)
    lo = max(0, position - window)
    left = tokens[lo:position]
    out[window - len(left) : window] = left
    right = tokens[position + 1 : position + 1 + window]
    out[window : window + len(right)] = right
    return out


def _hidden(model: EmbeddingModel, doc_vector: np.ndarray, context: np.ndarray):
    """Build the hidden vector h and the recipe for distributing its gradient.

    Returns (h, mode, slots) where ``slots`` are the word rows contributing
    to h: all 2n positional slots for concat, the present (non-padding) words
    for mean, and an empty array for DBOW.
    """
    hp = model.hp
    if hp.architecture == "dbow":
        return doc_vector.copy(), "dbow", np.zeros(0, dtype=np.int64)
    if len(context) == 0:
        raise ValueError("DM mode requires a non-empty context")
    if hp.combine == "concat":
        if len(context) != 2 * hp.window:
            raise ValueError(f"concat mode expects {2 * hp.window} context slots, got {len(context)}")
        h = np.empty((2 * hp.window + 1, hp.dim))
        h[0] = doc_vector
        h[1:] = model.w[context]
        return h.reshape(-1), "concat", np.asarray(context, dtype=np.int64)
    present = np.asarray(context, dtype=np.int64)
    present = present[present != NULL_INDEX]
    h = (doc_vector + model.w[present].sum(axis=0)) / (1.0 + len(present))
    return h, "mean", present


def _apply_hidden_gradient(model: EmbeddingModel, doc: int, mode: str, slots: np.ndarray, step: np.ndarray) -> None:
    """Distribute a (step-scaled) hidden-layer gradient onto D and W rows."""
    hp = model.hp
    if mode == "dbow":
        model.d[doc] += step
    elif mode == "concat":
        chunks = step.reshape(2 * hp.window + 1, hp.dim)
        model.d[doc] += chunks[0]
        np.add.at(model.w, slots, chunks[1:])
    else:
        scale = 1.0 / (1.0 + len(slots))
        model.d[doc] += step * scale
        if len(slots):
            np.add.at(model.w, slots, np.broadcast_to(step * scale, (len(slots), hp.dim)))


def _neg_core(h: np.ndarray, out_rows: np.ndarray):
    """Objective and analytic gradients of the negative-sampling loss.

    ``out_rows`` stacks the target output vector first and the K negative
    vectors after it. The objective is
    log sigma(v'_t . h) + sum_i log sigma(-v'_ni . h); the returned row
    gradients are exact partials of that expression.
    """
    x = out_rows @ h
    s = sigmoid(x)
    objective = float(np.log(s[0]) + np.log1p(-s[1:]).sum())
    g = np.empty_like(s)
    g[0] = 1.0 - s[0]
    g[1:] = -s[1:]
    grad_h = g @ out_rows
    grad_rows = np.outer(g, h)
    return objective, grad_h, grad_rows


def _hs_core(h: np.ndarray, node_rows: np.ndarray, bits: np.ndarray):
    """Log-probability and analytic gradients along one Huffman path.

    Branch bit 0 contributes sigma(v'_node . h), bit 1 contributes
    sigma(-v'_node . h).
    """
    signs = 1.0 - 2.0 * bits.astype(np.float64)
    x = node_rows @ h
    s = sigmoid(signs * x)
    log_prob = float(np.log(s).sum())
    g = signs * (1.0 - s)
    grad_h = g @ node_rows
    grad_rows = np.outer(g, h)
    return log_prob, grad_h, grad_rows


def neg_objective_and_gradients(
    model: EmbeddingModel, sample: ContextSample, negatives: Sequence[int]
):
    """Negative-sampling objective and its exact gradients for one sample.

    Returns (objective, grad_h, grad_target, grad_negatives) where
    grad_negatives has one row per draw; a duplicated draw gets its own row,
    so callers accumulate rows when applying updates.
    """
    negatives = np.asarray(negatives, dtype=np.int64)
    if len(negatives) == 0:
        raise ValueError("negative sampling needs at least one noise draw")
    if np.any(negatives == sample.target):
        raise ValueError("negative draws must not contain the target")
    h, _, _ = _hidden(model, model.d[sample.doc], sample.context)
    rows = np.concatenate(([sample.target], negatives))
    objective, grad_h, grad_rows = _neg_core(h, model.o[rows])
    return objective, grad_h, grad_rows[0], grad_rows[1:]


def hs_probability_and_gradients(model: EmbeddingModel, sample: ContextSample, target: int):
    """Huffman-path probability of ``target`` plus gradients along the path.

    Returns (probability, grad_h, node_ids, grad_nodes).
    """
    if model.huffman is None:
        raise ValueError("model has no code tree; train with objective='hs'")
    h, _, _ = _hidden(model, model.d[sample.doc], sample.context)
    nodes = model.huffman.paths[target]
    bits = model.huffman.codes[target]
    if len(nodes) == 0:
        return 1.0, np.zeros_like(h), nodes, np.zeros((0, len(h)))
    log_prob, grad_h, grad_rows = _hs_core(h, model.o[nodes], bits)
    return float(np.exp(log_prob)), grad_h, nodes, grad_rows


def softmax_distribution(model: EmbeddingModel, context: Sequence[int], doc: int) -> np.ndarray:
    """Exact normalized distribution over the vocabulary for one context.

    Desk-scale oracle only: cost is linear in |V| per call, which is the
    exact expense the sampled objectives avoid. Requires per-word output
    rows, so it applies to negative-sampling models.
    """
    if model.hp.objective != "neg":
        raise ValueError("exact softmax needs per-word output rows (objective='neg')")
    h, _, _ = _hidden(model, model.d[doc], np.asarray(context, dtype=np.int64))
    scores = model.o[1:] @ h
    scores -= scores.max()
    e = np.exp(scores)
    return e / e.sum()


def softmax_probability(model: EmbeddingModel, context: Sequence[int], doc: int, target: int) -> float:
    """Exact softmax probability of ``target`` given context and paragraph."""
    if not (1 <= target <= model.vocab.size):
        raise ValueError("target index out of vocabulary range")
    return float(softmax_distribution(model, context, doc)[target - 1])


def draw_negatives(
    noise_table: NoiseTable, k: int, exclude: int, rng: np.random.Generator
) -> np.ndarray:
    """K draws from the noise distribution, redrawing any equal to ``exclude``."""
    if noise_table.vocab_size < 2:
        raise ValueError("need at least 2 vocabulary tokens to exclude-sample")
    if k < 1:
        raise ValueError("k must be >= 1")
    draws = noise_table.draw(rng, k)
    mask = draws == exclude
    while mask.any():
        draws[mask] = noise_table.draw(rng, int(mask.sum()))
        mask = draws == exclude
    return draws


def _train_position(
    model: EmbeddingModel,
    seq: np.ndarray,
    k: int,
    doc: int,
    doc_vector: np.ndarray,
    alpha: float,
    noise: NoiseTable | None,
    rng: np.random.Generator,
    freeze_words: bool,
) -> tuple[float, int]:
    """Apply the selected objective at one surviving position.

    Returns (summed objective, number of objective applications). When
    ``freeze_words`` is set only the paragraph vector receives gradient
    (inference mode); W and O stay untouched.
    """
    hp = model.hp
    if hp.architecture == "dm":
        targets = [int(seq[k])]
        contexts = [make_context(seq, k, hp.window)]
    else:
        lo = max(0, k - hp.window)
        window_words = np.concatenate((seq[lo:k], seq[k + 1 : k + 1 + hp.window]))
        targets = [int(t) for t in window_words]
        contexts = [np.zeros(0, dtype=np.int64)] * len(targets)

    total = 0.0
    applied = 0
    for target, context in zip(targets, contexts):
        h, mode, slots = _hidden(model, doc_vector, context)
        if hp.objective == "neg":
            negs = draw_negatives(noise, hp.negative, target, rng)
            rows = np.concatenate(([target], negs))
            objective, grad_h, grad_rows = _neg_core(h, model.o[rows])
            if not freeze_words:
                np.add.at(model.o, rows, alpha * grad_rows)
        else:
            nodes = model.huffman.paths[target]
            if len(nodes) == 0:
                continue
            bits = model.huffman.codes[target]
            objective, grad_h, grad_rows = _hs_core(h, model.o[nodes], bits)
            if not freeze_words:
                model.o[nodes] += alpha * grad_rows

        step = alpha * grad_h
        if freeze_words:
            if mode == "dbow":
                doc_vector += step
            elif mode == "concat":
                doc_vector += step.reshape(2 * hp.window + 1, hp.dim)[0]
            else:
                doc_vector += step / (1.0 + len(slots))
        else:
            _apply_hidden_gradient(model, doc, mode, slots, step)
        total += objective
        applied += 1
    return total, applied


def train(
    model: EmbeddingModel,
    paragraphs: Sequence[Sequence[int]],
    progress: Callable[[int, float], None] | None = None,
) -> tuple[EmbeddingModel, list[float]]:
    """Train the model in place over encoded paragraphs; returns a loss trace.

    Each epoch revisits every paragraph position, discards it by a fresh
    subsampling draw, slides the context window over the surviving sequence
    and applies one SGD step per objective application. The learning rate
    decays linearly from lr_start to lr_end across the epochs * total_positions
    scheduled updates (the schedule advances per original position, so it does
    not depend on the subsampling draws). The returned trace holds the mean
    objective value per epoch, measured before each update.
    """
    if len(paragraphs) == 0:
        raise ValueError("empty dataset")
    if len(paragraphs) != model.num_paragraphs:
        raise ValueError(
            f"model was initialized for {model.num_paragraphs} paragraphs, got {len(paragraphs)}"
        )
    hp = model.hp
    if hp.epochs == 0:
        return model, []

    encoded = [np.asarray(p, dtype=np.int64) for p in paragraphs]
    noise = build_noise_table(model.vocab) if hp.objective == "neg" else None
    discard = discard_table(model.vocab, hp.subsample)
    rng = np.random.default_rng([hp.seed, 1])

    total_positions = sum(len(p) for p in encoded)
    total_scheduled = hp.epochs * total_positions
    lr_span = hp.lr_end - hp.lr_start
    done = 0

    trace: list[float] = []
    for epoch in range(hp.epochs):
        epoch_sum = 0.0
        epoch_applied = 0
        for doc, tokens in enumerate(encoded):
            if len(tokens) == 0:
                continue
            if hp.subsample > 0:
                keep = rng.random(len(tokens)) >= discard[tokens]
                seq = tokens[keep]
                positions = np.flatnonzero(keep)
            else:
                seq = tokens
                positions = np.arange(len(tokens))
            for k in range(len(seq)):
                frac = (done + int(positions[k])) / total_scheduled
                alpha = max(hp.lr_end, hp.lr_start + lr_span * frac)
                s, n = _train_position(
                    model, seq, k, doc, model.d[doc], alpha, noise, rng, freeze_words=False
                )
                epoch_sum += s
                epoch_applied += n
            done += len(tokens)
        mean_objective = epoch_sum / epoch_applied if epoch_applied else float("nan")
        trace.append(mean_objective)
        if progress is not None:
            progress(epoch, mean_objective)
    return model, trace


def infer_vector(
    model: EmbeddingModel,
    tokens: Sequence[str],
    epochs: int = 50,
    seed: int = 0,
    unfreeze_words: bool = False,
) -> np.ndarray:
    """Infer a vector for an unseen paragraph with all trained weights fixed.

    A fresh paragraph vector is initialized from ``seed`` and trained by the
    same SGD procedure while W and O stay untouched. ``unfreeze_words``
    switches on the looser reading in which the word vectors of the unseen
    paragraph's own tokens are also updated; it is off by default and leaves
    O frozen either way.
    """
    encoded = model.vocab.encode(tokens)
    if len(encoded) == 0:
        raise ValueError("uninferable paragraph: no in-vocabulary tokens")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    hp = model.hp
    rng = np.random.default_rng([seed, 2])
    bound = 0.5 / hp.dim
    vec = rng.uniform(-bound, bound, size=hp.dim)

    noise = build_noise_table(model.vocab) if hp.objective == "neg" else None
    discard = discard_table(model.vocab, hp.subsample)
    total_scheduled = epochs * len(encoded)
    lr_span = hp.lr_end - hp.lr_start
    done = 0
    for _ in range(epochs):
        if hp.subsample > 0:
            keep = rng.random(len(encoded)) >= discard[encoded]
            seq = encoded[keep]
            positions = np.flatnonzero(keep)
        else:
            seq = encoded
            positions = np.arange(len(encoded))
        for k in range(len(seq)):
            frac = (done + int(positions[k])) / total_scheduled
            alpha = max(hp.lr_end, hp.lr_start + lr_span * frac)
            _train_position(
                model, seq, k, -1, vec, alpha, noise, rng,
                freeze_words=not unfreeze_words,
            )
        done += len(encoded)
    return vec


def most_similar(model: EmbeddingModel, token: str, k: int = 5) -> list[tuple[str, float]]:
    """Top-k vocabulary neighbors of ``token`` by cosine over word vectors."""
    if token not in model.vocab:
        raise ValueError(f"token {token!r} not in vocabulary")
    if not (1 <= k < model.vocab.size):
        raise ValueError("k must satisfy 1 <= k < vocabulary size")
    idx = model.vocab.token_to_index[token]
    rows = model.w[1:]
    norms = np.linalg.norm(rows, axis=1)
    norms[norms == 0] = 1.0
    unit = rows / norms[:, None]
    sims = unit @ unit[idx - 1]
    sims[idx - 1] = -np.inf
    order = np.argsort(-sims, kind="stable")[:k]
    return [(model.vocab.index_to_token[i + 1], float(sims[i])) for i in order]


def model_to_bytes(model: EmbeddingModel) -> bytes:
    """Serialize to the versioned container format.

    Layout: magic, uint32 format version, uint64 header length, canonical
    JSON header (hyperparams, vocabulary, shapes), then the W, O and D
    matrices as row-major little-endian float32. Loading and re-saving a
    file reproduces it byte for byte.
    """
    header = {
        "format_version": FORMAT_VERSION,
        "hyperparams": asdict(model.hp),
        "vocab": {
            "tokens": model.vocab.index_to_token[1:],
            "counts": [int(c) for c in model.vocab.counts[1:]],
            "total_tokens": model.vocab.total_tokens,
            "min_count": model.vocab.min_count,
        },
        "num_paragraphs": model.num_paragraphs,
        "w_shape": list(model.w.shape),
        "o_shape": list(model.o.shape),
        "d_shape": list(model.d.shape),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(blob)), blob]
    for m in (model.w, model.o, model.d):
        parts.append(np.ascontiguousarray(m, dtype="<f4").tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes) -> EmbeddingModel:
    if data[:4] != MAGIC:
        raise ValueError("not a model file: bad magic bytes")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    (hlen,) = struct.unpack_from("<Q", data, 8)
    header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    hp = Hyperparams(**header["hyperparams"])
    v = header["vocab"]
    tokens = v["tokens"]
    token_to_index = {t: i + 1 for i, t in enumerate(tokens)}
    counts = np.zeros(len(tokens) + 1, dtype=np.int64)
    counts[1:] = v["counts"]
    vocab = Vocabulary(token_to_index, [""] + list(tokens), counts, v["total_tokens"], v["min_count"])

    offset = 16 + hlen
    mats = []
    for key in ("w_shape", "o_shape", "d_shape"):
        shape = tuple(header[key])
        count = int(np.prod(shape)) if shape else 0
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset).reshape(shape)
        mats.append(arr.astype(np.float64))
        offset += count * 4
    w, o, d = mats
    huffman = HuffmanTree.from_counts(counts) if hp.objective == "hs" else None
    return EmbeddingModel(hp=hp, vocab=vocab, w=w, o=o, d=d, huffman=huffman)


def save_model(model: EmbeddingModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> EmbeddingModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
