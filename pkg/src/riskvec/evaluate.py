"""Classification metrics and the end-to-end hyperparameter sweep harness.

Metrics with a zero denominator are reported as absent (None) and rendered
as "-" in text output rather than coerced to 0, so degenerate classifier
rows keep the shape reviewers expect. AUC is computed as a rank statistic
with ties counted half, which equals the pairwise-comparison probability
exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
from dataclasses import dataclass, replace

import numpy as np

from . import classify
from .corpus import DatasetSplit, build_vocabulary, tokenize
from .embedding import Hyperparams, infer_vector, init_model, train

REPORT_METRIC_COLUMNS = ("auc", "accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None


def confusion(predictions, labels) -> Confusion:
    """Standard 2x2 counts from binary predictions and labels."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have equal length")
    if not (np.isin(predictions, (0, 1)).all() and np.isin(labels, (0, 1)).all()):
        raise ValueError("predictions and labels must be binary")
    tp = int(((predictions == 1) & (labels == 1)).sum())
    fp = int(((predictions == 1) & (labels == 0)).sum())
    fn = int(((predictions == 0) & (labels == 1)).sum())
    tn = int(((predictions == 0) & (labels == 0)).sum())
    return Confusion(tp, fp, fn, tn)


def metrics(c: Confusion) -> Metrics:
    """Accuracy, precision, recall and F1; zero-denominator ratios are None."""
    if c.total == 0:
        raise ValueError("empty confusion")
    accuracy = (c.tp + c.tn) / c.total
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else None
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else None
    if precision is None or recall is None or (precision + recall) == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return Metrics(accuracy, precision, recall, f1)


def auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties half.

    Computed from midranks, which is algebraically identical to averaging
    the pairwise comparison indicators.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class SweepRow:
    params: dict[str, object]
    auc: float | None
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass
class SweepReport:
    """One row per grid point, in grid order, with a fixed column set."""

    param_names: list[str]
    rows: list[SweepRow]

    @property
    def columns(self) -> list[str]:
        return self.param_names + list(REPORT_METRIC_COLUMNS)

    def _cell(self, value) -> str:
        if value is None:
            return "-"
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            cells = [self._cell(row.params[p]) for p in self.param_names]
            cells += [self._cell(getattr(row, m)) for m in REPORT_METRIC_COLUMNS]
            writer.writerow(cells)
        return buf.getvalue()

    def to_text(self) -> str:
        header = self.columns
        table = [header]
        for row in self.rows:
            cells = [self._cell(row.params[p]) for p in self.param_names]
            cells += [self._cell(getattr(row, m)) for m in REPORT_METRIC_COLUMNS]
            table.append(cells)
        widths = [max(len(r[i]) for r in table) for i in range(len(header))]
        lines = []
        for ri, r in enumerate(table):
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip())
            if ri == 0:
                lines.append("  ".join("-" * widths[i] for i in range(len(header))))
        return "\n".join(lines) + "\n"


def point_seed(base_seed: int, point: dict[str, object]) -> int:
    """Stable per-grid-point seed, independent of grid enumeration order."""
    key = repr((base_seed, sorted(point.items()))).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big") % (2**31)


HP_FIELDS = {
    "architecture",
    "objective",
    "negative",
    "subsample",
    "window",
    "dim",
    "min_count",
    "combine",
    "epochs",
    "lr_start",
    "lr_end",
}

# Sweep-facing shorthand for hyperparameter fields, mirroring the report
# column names (K for negative-sample count, T for the subsample threshold).
PARAM_ALIASES = {"k": "negative", "t": "subsample", "size": "dim"}


def _evaluate_point(
    point: dict[str, object],
    split: DatasetSplit,
    category: str,
    base_hp: Hyperparams,
    clf_kind: str,
    clf_params: dict | None,
    base_seed: int,
    infer_epochs: int,
    threshold: float,
) -> SweepRow:
    hp_overrides = {}
    clf_overrides = dict(clf_params or {})
    for name, value in point.items():
        field = PARAM_ALIASES.get(name, name)
        if field in HP_FIELDS:
            hp_overrides[field] = value
        elif field == "c":
            clf_overrides["c"] = value
        else:
            raise ValueError(f"unknown sweep parameter {name!r}")
    seed = point_seed(base_seed, point)
    hp = replace(base_hp, seed=seed, **hp_overrides)

    train_paragraphs = split.train_paragraphs()
    token_lists = [tokenize(p.text) for p in train_paragraphs]
    vocab = build_vocabulary(token_lists, hp.min_count)
    if vocab.size == 0:
        raise ValueError("training split produced an empty vocabulary")
    model = init_model(vocab, len(train_paragraphs), hp)
    train(model, [vocab.encode(t) for t in token_lists])

    labels_by_pid = {
        r.paragraph.paragraph_id: r.label for r in split.train if r.category == category
    }
    if not labels_by_pid:
        raise ValueError(f"category {category!r} absent from dataset")
    features = []
    labels = []
    for i, p in enumerate(train_paragraphs):
        features.append(classify.normalize(model.d[i]))
        labels.append(labels_by_pid[p.paragraph_id])
    clf = classify.train_classifier(
        clf_kind, np.array(features), np.array(labels),
        params=clf_overrides, category=category, seed=seed,
    )

    val_scores = []
    val_labels = []
    for r in split.validation:
        if r.category != category:
            continue
        tokens = tokenize(r.paragraph.text)
        try:
            vec = infer_vector(model, tokens, epochs=infer_epochs, seed=seed)
        except ValueError:
            continue
        val_scores.append(clf.predict_proba(classify.normalize(vec)))
        val_labels.append(r.label)
    if not val_scores:
        raise ValueError(f"no scorable validation records for category {category!r}")
    val_scores_arr = np.array(val_scores)
    val_labels_arr = np.array(val_labels)
    preds = (val_scores_arr >= threshold).astype(np.int64)
    m = metrics(confusion(preds, val_labels_arr))
    try:
        area = auc(val_scores_arr, val_labels_arr)
    except ValueError:
        area = None
    return SweepRow(dict(point), area, m.accuracy, m.precision, m.recall, m.f1)


def sweep(
    grid: dict[str, list],
    split: DatasetSplit,
    category: str,
    base_hp: Hyperparams | None = None,
    clf_kind: str = "svm_linear",
    clf_params: dict | None = None,
    base_seed: int = 0,
    infer_epochs: int = 20,
    threshold: float = 0.5,
) -> SweepReport:
    """Retrain the full embedding + classifier path at every grid point.

    Each point is seeded by a stable hash of its parameter assignment, so
    the same point produces the same row no matter where it appears in the
    grid, and rerunning the sweep reproduces the report byte for byte.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be non-empty")
    if category not in split.categories:
        raise ValueError(f"category {category!r} absent from dataset")
    names = list(grid.keys())
    rows = []
    for values in itertools.product(*(grid[n] for n in names)):
        point = dict(zip(names, values))
        rows.append(
            _evaluate_point(
                point, split, category, base_hp or Hyperparams(),
                clf_kind, clf_params, base_seed, infer_epochs, threshold,
            )
        )
    return SweepReport(names, rows)
