"""Document analysis, the review feedback loop, retraining and report export.

The flow: published models score each paragraph of a document per risk
category, producing Findings; a human reviewer accepts or rejects each
Finding, which appends a labeled record to the append-only training store;
retraining consumes the whole store (seed corpus plus every appended
record) and publishes a new immutable model version.

Rejected findings become negative training records: a rejection is direct
evidence the paragraph does not belong to that risk category.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
import urllib.parse
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import classify
from .corpus import VALID_ORIGINS, build_vocabulary, tokenize
from .embedding import (
    Hyperparams,
    infer_vector,
    init_model,
    model_from_bytes,
    model_to_bytes,
    train,
)

FINDING_STATUSES = ("pending", "accepted", "rejected")
EXPORT_FORMATS = ("csv", "text")
EXPORT_CSV_COLUMNS = (
    "doc_id",
    "finding_id",
    "paragraph_id",
    "category",
    "probability",
    "status",
    "comment",
    "model_version",
    "paragraph_text",
)


@dataclass(frozen=True)
class Finding:
    """One flagged (paragraph, category, probability) record under review."""

    finding_id: str
    paragraph_id: str
    doc_id: str
    category: str
    probability: float
    status: str = "pending"
    comment: str = ""
    model_version: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class StoreRecord:
    paragraph_id: str
    doc_id: str
    text: str
    category: str
    label: int
    origin: str
    timestamp: str
    finding_id: str | None = None


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


class TrainingStore:
    """Append-only log of labeled training records.

    Backed by a newline-delimited JSON file when a path is given; records are
    never rewritten or removed. Review-originated records must reference the
    finding that produced them.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._records: list[StoreRecord] = []
        if self._path is not None and self._path.exists():
            with open(self._path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._records.append(StoreRecord(**json.loads(line)))

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[StoreRecord, ...]:
        return tuple(self._records)

    def append(
        self,
        *,
        paragraph_id: str,
        doc_id: str,
        text: str,
        category: str,
        label: int,
        origin: str,
        finding_id: str | None = None,
    ) -> StoreRecord:
        if origin not in VALID_ORIGINS:
            raise ValueError(f"origin must be one of {VALID_ORIGINS}")
        if label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if origin in ("review-accept", "review-reject") and not finding_id:
            raise ValueError("review records must reference a finding")
        record = StoreRecord(
            paragraph_id=paragraph_id,
            doc_id=doc_id,
            text=text,
            category=category,
            label=label,
            origin=origin,
            timestamp=_utc_now(),
            finding_id=finding_id,
        )
        self._records.append(record)
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")
        return record

    def unique_paragraphs(self) -> list[tuple[str, str]]:
        """(paragraph_id, text) in first-seen order, one entry per paragraph."""
        seen: dict[str, str] = {}
        for r in self._records:
            seen.setdefault(r.paragraph_id, r.text)
        return list(seen.items())

    def category_labels(self, category: str) -> dict[str, int]:
        """Effective label per paragraph for one category; last record wins."""
        labels: dict[str, int] = {}
        for r in self._records:
            if r.category == category:
                labels[r.paragraph_id] = r.label
        return labels


def _category_dirname(category: str) -> str:
    return urllib.parse.quote(category, safe="")


@dataclass(frozen=True)
class PublishedVersion:
    category: str
    version: int
    embedding_bytes: bytes
    classifier_bytes: bytes
    created_at: str


class ModelRegistry:
    """Versioned, immutable store of published (embedding, classifier) pairs.

    Publishing never mutates an existing version; the version counter is
    monotone per category. With a root directory the registry persists each
    version as its own subdirectory and reloads on construction.
    """

    def __init__(self, root: str | Path | None = None):
        self._root = Path(root) if root is not None else None
        self._versions: dict[str, list[PublishedVersion]] = {}
        if self._root is not None and self._root.exists():
            for cat_dir in sorted(self._root.iterdir()):
                if not cat_dir.is_dir():
                    continue
                category = urllib.parse.unquote(cat_dir.name)
                for vdir in sorted(cat_dir.iterdir()):
                    if not vdir.is_dir() or not vdir.name.startswith("v"):
                        continue
                    meta = json.loads((vdir / "meta.json").read_text())
                    self._versions.setdefault(category, []).append(
                        PublishedVersion(
                            category=category,
                            version=meta["version"],
                            embedding_bytes=(vdir / "embedding.pv").read_bytes(),
                            classifier_bytes=(vdir / "classifier.json").read_bytes(),
                            created_at=meta["created_at"],
                        )
                    )
        for versions in self._versions.values():
            versions.sort(key=lambda v: v.version)

    def categories(self) -> list[str]:
        return sorted(self._versions)

    def versions(self, category: str) -> list[int]:
        return [v.version for v in self._versions.get(category, [])]

    def has_model(self, category: str) -> bool:
        return bool(self._versions.get(category))

    def latest_version(self, category: str) -> int | None:
        versions = self.versions(category)
        return versions[-1] if versions else None

    def publish(self, category: str, embedding_bytes: bytes, classifier_bytes: bytes) -> int:
        version = (self.latest_version(category) or 0) + 1
        published = PublishedVersion(
            category=category,
            version=version,
            embedding_bytes=embedding_bytes,
            classifier_bytes=classifier_bytes,
            created_at=_utc_now(),
        )
        if self._root is not None:
            vdir = self._root / _category_dirname(category) / f"v{version:04d}"
            vdir.mkdir(parents=True, exist_ok=False)
            (vdir / "embedding.pv").write_bytes(embedding_bytes)
            (vdir / "classifier.json").write_bytes(classifier_bytes)
            (vdir / "meta.json").write_text(
                json.dumps({"category": category, "version": version, "created_at": published.created_at})
            )
        self._versions.setdefault(category, []).append(published)
        return version

    def get_bytes(self, category: str, version: int | str = "latest") -> PublishedVersion:
        versions = self._versions.get(category)
        if not versions:
            raise KeyError(f"no model published for category {category!r}")
        if version == "latest":
            return versions[-1]
        for v in versions:
            if v.version == version:
                return v
        raise KeyError(f"no version {version} for category {category!r}")

    def get(self, category: str, version: int | str = "latest"):
        """Deserialize a published pair; returns (model, classifier, version)."""
        pub = self.get_bytes(category, version)
        return (
            model_from_bytes(pub.embedding_bytes),
            classify.classifier_from_bytes(pub.classifier_bytes),
            pub.version,
        )


def derive_seed(*parts) -> int:
    """Stable seed from arbitrary key material (content-addressed RNG)."""
    key = "|".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big") % (2**31)


def finding_id_for(doc_id: str, paragraph_id: str, category: str, version: int) -> str:
    digest = hashlib.blake2b(
        f"{doc_id}|{paragraph_id}|{category}|{version}".encode("utf-8"), digest_size=8
    ).hexdigest()
    return f"f{digest}"


def analyze_document(
    doc_id: str,
    paragraphs: Sequence[tuple[str, str]],
    categories: Sequence[str],
    registry: ModelRegistry,
    threshold: float = 0.5,
    infer_epochs: int = 50,
) -> tuple[list[Finding], list[dict]]:
    """Score every paragraph against every requested category's latest model.

    Paragraph vectors are inferred with frozen weights under a seed derived
    from the model seed and the paragraph id, so repeated analysis of the
    same document against the same model version agrees exactly. Paragraphs
    with no in-vocabulary tokens are skipped with a warning record instead
    of failing the document.
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must lie in [0, 1]")
    for category in categories:
        if not registry.has_model(category):
            raise KeyError(f"no model published for category {category!r}")

    findings: list[Finding] = []
    warnings: list[dict] = []
    for category in categories:
        model, clf, version = registry.get(category)
        scored: list[tuple[float, int, Finding]] = []
        for order, (paragraph_id, text) in enumerate(paragraphs):
            tokens = tokenize(text)
            try:
                vec = infer_vector(
                    model,
                    tokens,
                    epochs=infer_epochs,
                    seed=derive_seed(model.hp.seed, paragraph_id),
                )
            except ValueError:
                warnings.append(
                    {
                        "paragraph_id": paragraph_id,
                        "category": category,
                        "reason": "uninferable paragraph: no in-vocabulary tokens",
                    }
                )
                continue
            probability = clf.predict_proba(classify.normalize(vec))
            if probability >= threshold:
                finding = Finding(
                    finding_id=finding_id_for(doc_id, paragraph_id, category, version),
                    paragraph_id=paragraph_id,
                    doc_id=doc_id,
                    category=category,
                    probability=float(probability),
                    status="pending",
                    comment="",
                    model_version=f"v{version}",
                )
                scored.append((-probability, order, finding))
        scored.sort(key=lambda t: (t[0], t[1]))
        findings.extend(f for _, _, f in scored)
    return findings, warnings


def record_review(
    finding: Finding,
    paragraph_text: str,
    verdict: str,
    store: TrainingStore,
    comment: str = "",
) -> Finding:
    """Apply a reviewer verdict: update the finding, append one store record.

    Accept appends a positive record, reject a negative one. A finding can
    be reviewed once; any later verdict is an error.
    """
    if verdict not in ("accept", "reject"):
        raise ValueError("verdict must be 'accept' or 'reject'")
    if finding.status != "pending":
        raise ValueError(f"finding {finding.finding_id} already reviewed ({finding.status})")
    label = 1 if verdict == "accept" else 0
    store.append(
        paragraph_id=finding.paragraph_id,
        doc_id=finding.doc_id,
        text=paragraph_text,
        category=finding.category,
        label=label,
        origin="review-accept" if verdict == "accept" else "review-reject",
        finding_id=finding.finding_id,
    )
    return replace(
        finding,
        status="accepted" if verdict == "accept" else "rejected",
        comment=comment,
    )


def add_manual_example(
    store: TrainingStore,
    categories: Sequence[str],
    *,
    paragraph_id: str,
    doc_id: str,
    text: str,
    category: str,
    label: int = 1,
) -> StoreRecord:
    """Append a manually identified clause to the training store."""
    if category not in categories:
        raise ValueError(f"category {category!r} is not registered")
    return store.append(
        paragraph_id=paragraph_id,
        doc_id=doc_id,
        text=text,
        category=category,
        label=label,
        origin="manual-add",
    )


def training_records_for(store: TrainingStore, category: str) -> list[tuple[str, str, int]]:
    """Assemble (paragraph_id, text, label) records for one category.

    Only paragraphs with an explicit record for the category participate;
    the latest record wins when a paragraph has several.
    """
    labels = store.category_labels(category)
    texts = dict(store.unique_paragraphs())
    return [(pid, texts[pid], label) for pid, label in labels.items()]


def retrain(
    category: str,
    registry: ModelRegistry,
    store: TrainingStore,
    hp: Hyperparams,
    clf_kind: str = "svm_linear",
    clf_params: dict | None = None,
) -> int:
    """Retrain embeddings and the category classifier from the full store.

    Training is a full rebuild (never incremental): the embedding corpus is
    every unique paragraph in the store and the classifier set is the
    category's assembled records. The result is published as the next
    version; earlier versions are untouched.
    """
    corpus = store.unique_paragraphs()
    if not corpus:
        raise ValueError("training store is empty")
    records = training_records_for(store, category)
    if not records:
        raise ValueError(f"training store has no records for category {category!r}")

    token_lists = [tokenize(text) for _, text in corpus]
    vocab = build_vocabulary(token_lists, hp.min_count)
    if vocab.size == 0:
        raise ValueError("corpus produced an empty vocabulary; lower min_count or add data")
    model = init_model(vocab, len(corpus), hp)
    train(model, [vocab.encode(t) for t in token_lists])

    row_of = {pid: i for i, (pid, _) in enumerate(corpus)}
    features = np.array([classify.normalize(model.d[row_of[pid]]) for pid, _, _ in records])
    labels = np.array([label for _, _, label in records])
    clf = classify.train_classifier(
        clf_kind, features, labels, params=dict(clf_params or {}),
        category=category, seed=hp.seed,
    )
    return registry.publish(category, model_to_bytes(model), classify.classifier_to_bytes(clf))


def export_report(
    doc: dict,
    findings: Sequence[Finding],
    fmt: str,
    paragraph_texts: dict[str, str],
) -> str:
    """Render a document's findings as CSV (machine-readable) or text.

    The CSV form is lossless: parsing it back and re-exporting reproduces
    the bytes exactly. Probabilities are written with repr precision so the
    round trip preserves the float bit pattern.
    """
    if fmt not in EXPORT_FORMATS:
        raise ValueError(f"format must be one of {EXPORT_FORMATS}")
    if fmt == "csv":
        rows = [
            {
                "doc_id": f.doc_id,
                "finding_id": f.finding_id,
                "paragraph_id": f.paragraph_id,
                "category": f.category,
                "probability": repr(f.probability),
                "status": f.status,
                "comment": f.comment,
                "model_version": f.model_version,
                "paragraph_text": paragraph_texts.get(f.paragraph_id, ""),
            }
            for f in findings
        ]
        return render_csv_rows(rows)

    lines = [
        f"Risk findings report",
        f"Document: {doc.get('doc_id', '')}",
        f"Title: {doc.get('title', '')}",
        f"Findings: {len(findings)}",
        "",
    ]
    for f in findings:
        lines.append(f"[{f.category}] p={f.probability:.4f} status={f.status} ({f.finding_id})")
        lines.append(f"  paragraph {f.paragraph_id} (model {f.model_version})")
        text = paragraph_texts.get(f.paragraph_id, "")
        if text:
            lines.append(f"  {text}")
        if f.comment:
            lines.append(f"  comment: {f.comment}")
        lines.append("")
    return "\n".join(lines)


def render_csv_rows(rows: Iterable[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=EXPORT_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def parse_report_csv(data: str) -> list[dict[str, str]]:
    """Parse an exported CSV report back into its rows."""
    reader = csv.DictReader(io.StringIO(data))
    if reader.fieldnames is None or tuple(reader.fieldnames) != EXPORT_CSV_COLUMNS:
        raise ValueError("not a findings report: unexpected columns")
    return [dict(row) for row in reader]
