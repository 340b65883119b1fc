"""Corpus ingestion: tokenization, vocabulary and the derived sampling tables.

Raw paragraphs come in as newline-delimited JSON records (one flat object per
paragraph with ``doc_id``, ``paragraph_id``, ``text`` and ``categories``).
This module turns them into token-index sequences against a frequency-filtered
vocabulary and builds the two tables that drive embedding training: the noise
distribution used to draw negative samples and the per-token discard
probabilities used to subsample frequent words.

Token index 0 is reserved as a padding slot (``NULL_INDEX``); real tokens are
numbered from 1. Out-of-vocabulary tokens are dropped at encoding time.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NULL_INDEX = 0

# Maximal runs of letters/digits, else any single non-space character
# (punctuation, symbols and underscore each stand alone).
_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")

VALID_ORIGINS = ("seed-data", "review-accept", "review-reject", "manual-add")


def tokenize(raw_text: str, lowercase: bool = True) -> list[str]:
    """Split text into word and punctuation tokens.

    Words are maximal runs of letters/digits; every other non-whitespace
    character becomes its own standalone token, so punctuation survives as
    ordinary vocabulary entries. Lowercasing is applied first when enabled
    (the default). Tokenizing the space-joined output reproduces the token
    list, which keeps the rule reversible.
    """
    if lowercase:
        raw_text = raw_text.lower()
    return _TOKEN_RE.findall(raw_text)


@dataclass
class Vocabulary:
    """Token/index map with raw counts.

    ``total_tokens`` is the pre-filter corpus size and is the denominator for
    relative frequencies, so filtered-out rare words still contribute mass to
    f(w). Indices run from 1; index 0 is the reserved padding slot and never
    maps to a surface token.
    """

    token_to_index: dict[str, int]
    index_to_token: list[str]
    counts: np.ndarray
    total_tokens: int
    min_count: int

    @property
    def size(self) -> int:
        """Number of real tokens (excludes the padding slot)."""
        return len(self.token_to_index)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def frequencies(self) -> np.ndarray:
        """Relative frequency f(w) per index; entry 0 is the padding slot."""
        if self.total_tokens == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts.astype(np.float64) / float(self.total_tokens)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        """Map tokens to indices, silently dropping out-of-vocabulary ones."""
        t2i = self.token_to_index
        return np.array([t2i[t] for t in tokens if t in t2i], dtype=np.int64)

    @classmethod
    def from_counts(cls, counts: dict[str, int], total_tokens: int, min_count: int = 5) -> "Vocabulary":
        if min_count < 1:
            raise ValueError("min_count must be >= 1")
        kept = sorted(
            ((t, c) for t, c in counts.items() if c >= min_count),
            key=lambda tc: (-tc[1], tc[0]),
        )
        token_to_index = {t: i + 1 for i, (t, _) in enumerate(kept)}
        index_to_token = [""] + [t for t, _ in kept]
        arr = np.zeros(len(kept) + 1, dtype=np.int64)
        for t, c in kept:
            arr[token_to_index[t]] = c
        return cls(token_to_index, index_to_token, arr, total_tokens, min_count)


def build_vocabulary(token_lists: Iterable[Sequence[str]], min_count: int = 5) -> Vocabulary:
    """Count tokens across paragraphs and keep those with count >= min_count.

    The pre-filter total token count is recorded so relative frequencies are
    taken over the whole corpus, not just the surviving vocabulary. An empty
    corpus yields an empty (but valid) vocabulary.
    """
    counts: Counter[str] = Counter()
    total = 0
    for tokens in token_lists:
        counts.update(tokens)
        total += len(tokens)
    return Vocabulary.from_counts(counts, total, min_count)


@dataclass
class NoiseTable:
    """Unigram^exponent noise distribution with cumulative-sum sampling.

    ``probabilities`` is aligned with vocabulary indices (entry 0, the padding
    slot, carries zero mass) and sums to 1. Draws cost O(log |V|) via binary
    search on the cumulative table.
    """

    probabilities: np.ndarray
    exponent: float
    cumulative: np.ndarray = field(repr=False)

    @property
    def vocab_size(self) -> int:
        return len(self.probabilities) - 1

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` token indices distributed per the table."""
        u = rng.random(size)
        return np.searchsorted(self.cumulative, u, side="right").astype(np.int64)


def build_noise_table(vocab: Vocabulary, exponent: float = 0.75) -> NoiseTable:
    """Noise distribution P(w) = f(w)^exponent / sum_j f(w_j)^exponent."""
    if vocab.size == 0:
        raise ValueError("empty vocabulary: nothing to sample")
    if exponent <= 0:
        raise ValueError("exponent must be > 0")
    freqs = vocab.frequencies()
    weights = np.zeros_like(freqs)
    weights[1:] = freqs[1:] ** exponent
    total = weights.sum()
    if total <= 0:
        raise ValueError("degenerate frequencies: nothing to sample")
    probs = weights / total
    return NoiseTable(probs, exponent, np.cumsum(probs))


def discard_probability(f: float, t: float) -> float:
    """Probability of discarding one occurrence of a word with frequency f.

    Returns max(0, 1 - sqrt(t / f)). A threshold of 0 disables subsampling
    entirely (every word is always kept).
    """
    if f <= 0:
        raise ValueError("frequency must be > 0")
    if f > 1:
        raise ValueError("frequency must be <= 1")
    if t < 0:
        raise ValueError("threshold must be >= 0")
    if t == 0:
        return 0.0
    return max(0.0, 1.0 - math.sqrt(t / f))


def discard_table(vocab: Vocabulary, t: float) -> np.ndarray:
    """Per-index discard probabilities (0 for the padding slot)."""
    freqs = vocab.frequencies()
    out = np.zeros_like(freqs)
    if t == 0:
        return out
    nz = freqs > 0
    out[nz] = np.maximum(0.0, 1.0 - np.sqrt(t / freqs[nz]))
    return out


@dataclass(frozen=True)
class LabeledParagraph:
    """One tagged paragraph from the training corpus."""

    paragraph_id: str
    doc_id: str
    text: str
    categories: frozenset[str]

    @classmethod
    def from_record(cls, record: dict) -> "LabeledParagraph":
        return cls(
            paragraph_id=record["paragraph_id"],
            doc_id=record.get("doc_id", ""),
            text=record["text"],
            categories=frozenset(record.get("categories", [])),
        )


@dataclass(frozen=True)
class SplitRecord:
    """One (paragraph, category, binary label) training record."""

    paragraph: LabeledParagraph
    category: str
    label: int


@dataclass
class DatasetSplit:
    """Disjoint train/validation/test record lists.

    Each paragraph expands into one record per registered category: a positive
    for every category it is tagged with and a negative for every other, so a
    paragraph with an empty tag set is a negative example everywhere.
    """

    train: list[SplitRecord]
    validation: list[SplitRecord]
    test: list[SplitRecord]
    categories: list[str]

    @staticmethod
    def _paragraphs(records: list[SplitRecord]) -> list[LabeledParagraph]:
        seen: dict[str, LabeledParagraph] = {}
        for r in records:
            seen.setdefault(r.paragraph.paragraph_id, r.paragraph)
        return list(seen.values())

    def train_paragraphs(self) -> list[LabeledParagraph]:
        return self._paragraphs(self.train)

    def validation_paragraphs(self) -> list[LabeledParagraph]:
        return self._paragraphs(self.validation)

    def test_paragraphs(self) -> list[LabeledParagraph]:
        return self._paragraphs(self.test)


def ingest_labeled(
    records: Iterable[LabeledParagraph | dict],
    categories: Sequence[str],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Split labeled paragraphs and expand them into per-category records.

    The split is assigned at paragraph level (so no paragraph straddles
    splits) by a seeded shuffle followed by contiguous slicing, which makes
    the assignment deterministic for a fixed (records, ratios, seed).
    """
    paragraphs: list[LabeledParagraph] = []
    seen_ids: set[str] = set()
    registry = list(categories)
    registered = set(registry)
    for rec in records:
        p = rec if isinstance(rec, LabeledParagraph) else LabeledParagraph.from_record(rec)
        if p.paragraph_id in seen_ids:
            raise ValueError(f"duplicate paragraph_id: {p.paragraph_id!r}")
        seen_ids.add(p.paragraph_id)
        unknown = p.categories - registered
        if unknown:
            raise ValueError(f"unknown categories {sorted(unknown)} on paragraph {p.paragraph_id!r}")
        paragraphs.append(p)

    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three non-negative values summing to 1")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(paragraphs))
    shuffled = [paragraphs[i] for i in order]
    n = len(shuffled)
    n_train = int(round(ratios[0] * n))
    n_val = int(round((ratios[0] + ratios[1]) * n)) - n_train

    def expand(ps: list[LabeledParagraph]) -> list[SplitRecord]:
        return [
            SplitRecord(p, c, 1 if c in p.categories else 0)
            for p in ps
            for c in registry
        ]

    return DatasetSplit(
        train=expand(shuffled[:n_train]),
        validation=expand(shuffled[n_train : n_train + n_val]),
        test=expand(shuffled[n_train + n_val :]),
        categories=registry,
    )


def read_corpus(path: str | Path) -> list[LabeledParagraph]:
    """Read newline-delimited JSON paragraph records."""
    paragraphs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            paragraphs.append(LabeledParagraph.from_record(json.loads(line)))
    return paragraphs


def read_categories(path: str | Path) -> list[str]:
    """Read the category registry: one category name per line."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]
