"""Service API and the persistent workspace behind it.

The workspace owns all state (document store, training store, model
registry) under one data directory, so the HTTP API and the command-line
tool operate on identical artifacts. The API is versioned under /v1 and
every failure returns exactly one error object with a machine-readable code
from the closed set:

    empty_document    upload body had no text
    not_found         unknown document, finding or category version
    no_model          category has no published model
    unknown_category  category not in the registry file
    bad_threshold     threshold outside [0, 1]
    bad_verdict       verdict other than accept/reject
    already_reviewed  finding is not pending
    bad_format        unsupported export format
    insufficient_data retraining with an unusable store
    invalid_request   malformed request body or parameters
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from . import pipeline
from .corpus import read_categories, read_corpus
from .embedding import Hyperparams
from .pipeline import Finding, ModelRegistry, TrainingStore

API_ERROR_CODES = (
    "empty_document",
    "not_found",
    "no_model",
    "unknown_category",
    "bad_threshold",
    "bad_verdict",
    "already_reviewed",
    "bad_format",
    "insufficient_data",
    "invalid_request",
)


class ApiError(Exception):
    """One failing endpoint yields exactly one of these."""

    def __init__(self, code: str, message: str, status: int = 400, detail: Any = None):
        assert code in API_ERROR_CODES, code
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status
        self.detail = detail

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.detail is not None:
            out["detail"] = self.detail
        return out


def split_paragraphs(text: str, delimiter: str | None = None) -> list[str]:
    """Split a document into paragraphs on blank lines (or a given delimiter)."""
    if delimiter:
        parts = text.split(delimiter)
    else:
        parts = re.split(r"\n\s*\n", text)
    return [p.strip() for p in parts if p.strip()]


class Workspace:
    """All persistent state under one data directory.

    Layout: categories.txt, training_store.ndjson, documents/<id>.json,
    findings/<id>.json and models/<category>/v####/. A workspace can be
    reopened from the same directory and reconstructs every store.
    """

    def __init__(self, root: str | Path, default_seed: int = 1):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.default_seed = default_seed
        self.store = TrainingStore(self.root / "training_store.ndjson")
        self.registry = ModelRegistry(self.root / "models")
        (self.root / "documents").mkdir(exist_ok=True)
        (self.root / "findings").mkdir(exist_ok=True)

    # -- category registry -------------------------------------------------

    @property
    def _categories_path(self) -> Path:
        return self.root / "categories.txt"

    def categories(self) -> list[str]:
        if not self._categories_path.exists():
            return []
        return read_categories(self._categories_path)

    def set_categories(self, names: list[str]) -> None:
        self._categories_path.write_text("".join(f"{n}\n" for n in names), encoding="utf-8")

    # -- documents ----------------------------------------------------------

    def _doc_path(self, doc_id: str) -> Path:
        return self.root / "documents" / f"{doc_id}.json"

    def upload_document(self, text: str, title: str = "", delimiter: str | None = None) -> dict:
        if not text.strip():
            raise ApiError("empty_document", "document body is empty", status=400)
        # Content-addressed id: re-uploading the same document is idempotent
        # and CLI/API runs over the same input agree on every artifact.
        doc_id = "d" + hashlib.blake2b(
            (title + "\x00" + text).encode("utf-8"), digest_size=6
        ).hexdigest()
        existing = self._doc_path(doc_id)
        if existing.exists():
            return json.loads(existing.read_text(encoding="utf-8"))
        paragraphs = split_paragraphs(text, delimiter)
        record = {
            "doc_id": doc_id,
            "title": title,
            "uploaded_at": time.time(),
            "text": text,
            "paragraphs": [
                {"paragraph_id": f"{doc_id}-p{i:04d}", "text": p}
                for i, p in enumerate(paragraphs)
            ],
            "analysis_status": "pending",
        }
        existing.write_text(json.dumps(record, ensure_ascii=False), encoding="utf-8")
        return record

    def get_document(self, doc_id: str) -> dict:
        path = self._doc_path(doc_id)
        if not path.exists():
            raise ApiError("not_found", f"unknown document {doc_id!r}", status=404)
        return json.loads(path.read_text(encoding="utf-8"))

    def list_documents(self) -> list[dict]:
        docs = []
        for path in (self.root / "documents").glob("*.json"):
            d = json.loads(path.read_text(encoding="utf-8"))
            docs.append(
                {
                    "doc_id": d["doc_id"],
                    "title": d["title"],
                    "uploaded_at": d["uploaded_at"],
                    "paragraph_count": len(d["paragraphs"]),
                    "analysis_status": d["analysis_status"],
                }
            )
        docs.sort(key=lambda d: (-d["uploaded_at"], d["doc_id"]))
        return docs

    # -- findings -----------------------------------------------------------

    def _findings_path(self, doc_id: str) -> Path:
        return self.root / "findings" / f"{doc_id}.json"

    def _load_findings(self, doc_id: str) -> tuple[list[Finding], list[dict]]:
        path = self._findings_path(doc_id)
        if not path.exists():
            return [], []
        data = json.loads(path.read_text(encoding="utf-8"))
        return [Finding.from_dict(f) for f in data["findings"]], data.get("warnings", [])

    def _save_findings(self, doc_id: str, findings: list[Finding], warnings: list[dict]) -> None:
        self._findings_path(doc_id).write_text(
            json.dumps(
                {"doc_id": doc_id, "findings": [f.to_dict() for f in findings], "warnings": warnings},
                ensure_ascii=False,
            ),
            encoding="utf-8",
        )

    def findings_for(self, doc_id: str) -> tuple[list[Finding], list[dict]]:
        self.get_document(doc_id)
        return self._load_findings(doc_id)

    def _locate_finding(self, finding_id: str) -> tuple[str, list[Finding], list[dict], int]:
        for path in (self.root / "findings").glob("*.json"):
            data = json.loads(path.read_text(encoding="utf-8"))
            for i, f in enumerate(data["findings"]):
                if f["finding_id"] == finding_id:
                    findings = [Finding.from_dict(x) for x in data["findings"]]
                    return data["doc_id"], findings, data.get("warnings", []), i
        raise ApiError("not_found", f"unknown finding {finding_id!r}", status=404)

    # -- operations ----------------------------------------------------------

    def ingest_corpus(self, corpus_path: str | Path, categories_path: str | Path) -> dict:
        """Seed the training store from a labeled corpus file.

        Every paragraph yields one record per registered category (positive
        where tagged, negative elsewhere), so untagged paragraphs supply the
        negative pool.
        """
        categories = read_categories(categories_path)
        if not categories:
            raise ApiError("invalid_request", "category registry is empty")
        self.set_categories(categories)
        registered = set(categories)
        paragraphs = read_corpus(corpus_path)
        seen: set[str] = set()
        appended = 0
        for p in paragraphs:
            if p.paragraph_id in seen:
                raise ApiError("invalid_request", f"duplicate paragraph_id {p.paragraph_id!r}")
            seen.add(p.paragraph_id)
            unknown = p.categories - registered
            if unknown:
                raise ApiError(
                    "unknown_category",
                    f"paragraph {p.paragraph_id!r} carries unregistered categories {sorted(unknown)}",
                )
            for category in categories:
                self.store.append(
                    paragraph_id=p.paragraph_id,
                    doc_id=p.doc_id,
                    text=p.text,
                    category=category,
                    label=1 if category in p.categories else 0,
                    origin="seed-data",
                )
                appended += 1
        return {"paragraphs": len(paragraphs), "records": appended, "categories": categories}

    def retrain_category(
        self,
        category: str,
        hp: Hyperparams | None = None,
        clf_kind: str = "svm_linear",
        clf_params: dict | None = None,
    ) -> int:
        if category not in self.categories():
            raise ApiError("unknown_category", f"category {category!r} is not registered", status=404)
        hp = hp or Hyperparams(seed=self.default_seed)
        try:
            return pipeline.retrain(category, self.registry, self.store, hp, clf_kind, clf_params)
        except ValueError as exc:
            raise ApiError("insufficient_data", str(exc)) from exc

    def analyze(
        self,
        doc_id: str,
        categories: list[str] | None = None,
        threshold: float = 0.5,
        infer_epochs: int = 50,
    ) -> dict:
        doc = self.get_document(doc_id)
        requested = categories if categories else self.categories()
        if not requested:
            raise ApiError("invalid_request", "no categories requested and none registered")
        registered = set(self.categories())
        for c in requested:
            if c not in registered:
                raise ApiError("unknown_category", f"category {c!r} is not registered", status=404)
            if not self.registry.has_model(c):
                raise ApiError("no_model", f"no model published for category {c!r}", status=409)
        if not (0.0 <= threshold <= 1.0):
            raise ApiError("bad_threshold", "threshold must lie in [0, 1]")

        paragraphs = [(p["paragraph_id"], p["text"]) for p in doc["paragraphs"]]
        new_findings, warnings = pipeline.analyze_document(
            doc_id, paragraphs, requested, self.registry, threshold, infer_epochs
        )
        existing, _ = self._load_findings(doc_id)
        keep = {f.finding_id: f for f in existing if f.status != "pending"}
        merged = [keep.get(f.finding_id, f) for f in new_findings]
        # Reviewed findings from earlier analyses survive even when the new
        # pass no longer produces them (e.g. other categories or thresholds).
        merged_ids = {f.finding_id for f in merged}
        merged.extend(f for f in existing if f.status != "pending" and f.finding_id not in merged_ids)
        self._save_findings(doc_id, merged, warnings)
        doc["analysis_status"] = "analyzed"
        self._doc_path(doc_id).write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")
        return self._findings_payload(doc_id, merged, warnings, doc)

    def _findings_payload(self, doc_id, findings, warnings, doc) -> dict:
        texts = {p["paragraph_id"]: p["text"] for p in doc["paragraphs"]}
        grouped: dict[str, list[dict]] = {}
        for f in findings:
            entry = f.to_dict()
            entry["text"] = texts.get(f.paragraph_id, "")
            grouped.setdefault(f.category, []).append(entry)
        versions = {}
        for c in sorted(grouped):
            v = self.registry.latest_version(c)
            versions[c] = f"v{v}" if v else None
        return {
            "doc_id": doc_id,
            "findings": grouped,
            "warnings": warnings,
            "model_versions": versions,
        }

    def get_findings_payload(self, doc_id: str) -> dict:
        doc = self.get_document(doc_id)
        findings, warnings = self._load_findings(doc_id)
        return self._findings_payload(doc_id, findings, warnings, doc)

    def review(self, finding_id: str, verdict: str, comment: str = "") -> dict:
        if verdict not in ("accept", "reject"):
            raise ApiError("bad_verdict", "verdict must be 'accept' or 'reject'")
        doc_id, findings, warnings, idx = self._locate_finding(finding_id)
        doc = self.get_document(doc_id)
        texts = {p["paragraph_id"]: p["text"] for p in doc["paragraphs"]}
        target = findings[idx]
        if target.status != "pending":
            raise ApiError(
                "already_reviewed",
                f"finding {finding_id} already reviewed ({target.status})",
                status=409,
            )
        updated = pipeline.record_review(
            target, texts.get(target.paragraph_id, ""), verdict, self.store, comment
        )
        findings[idx] = updated
        self._save_findings(doc_id, findings, warnings)
        out = updated.to_dict()
        out["text"] = texts.get(updated.paragraph_id, "")
        return out

    def add_manual(self, text: str, category: str, label: int = 1, doc_id: str = "manual") -> dict:
        pid = "m" + hashlib.blake2b(text.encode("utf-8"), digest_size=6).hexdigest()
        try:
            record = pipeline.add_manual_example(
                self.store,
                self.categories(),
                paragraph_id=pid,
                doc_id=doc_id,
                text=text,
                category=category,
                label=label,
            )
        except ValueError as exc:
            raise ApiError("unknown_category", str(exc), status=404) from exc
        return asdict(record)

    def export(self, doc_id: str, fmt: str) -> str:
        doc = self.get_document(doc_id)
        if fmt not in pipeline.EXPORT_FORMATS:
            raise ApiError("bad_format", f"format must be one of {pipeline.EXPORT_FORMATS}")
        findings, _ = self._load_findings(doc_id)
        texts = {p["paragraph_id"]: p["text"] for p in doc["paragraphs"]}
        return pipeline.export_report(doc, findings, fmt, texts)


class UploadRequest(BaseModel):
    text: str
    title: str = ""
    delimiter: str | None = None


class AnalyzeRequest(BaseModel):
    categories: list[str] | None = None
    threshold: float = 0.5
    infer_epochs: int = 50


class ReviewRequest(BaseModel):
    verdict: str
    comment: str = ""


class RetrainRequest(BaseModel):
    seed: int | None = None
    architecture: str | None = None
    objective: str | None = None
    negative: int | None = None
    subsample: float | None = None
    window: int | None = None
    dim: int | None = None
    min_count: int | None = None
    combine: str | None = None
    epochs: int | None = None
    lr_start: float | None = None
    lr_end: float | None = None
    classifier: str = "svm_linear"
    c: float | None = None


class ManualExampleRequest(BaseModel):
    text: str
    category: str
    label: int = 1


def create_app(workspace: Workspace):
    """Build the versioned HTTP API over a workspace."""
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, PlainTextResponse

    app = FastAPI(title="riskvec", version="1")
    app.state.workspace = workspace
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.to_dict())

    @app.post("/v1/documents", status_code=201)
    def upload_document(body: UploadRequest):
        return workspace.upload_document(body.text, body.title, body.delimiter)

    @app.get("/v1/documents")
    def list_documents():
        return {"documents": workspace.list_documents()}

    @app.get("/v1/documents/{doc_id}")
    def get_document(doc_id: str):
        return workspace.get_document(doc_id)

    @app.post("/v1/documents/{doc_id}/analyze")
    def analyze(doc_id: str, body: AnalyzeRequest):
        return workspace.analyze(doc_id, body.categories, body.threshold, body.infer_epochs)

    @app.get("/v1/documents/{doc_id}/findings")
    def get_findings(doc_id: str):
        return workspace.get_findings_payload(doc_id)

    @app.post("/v1/findings/{finding_id}/review")
    def review(finding_id: str, body: ReviewRequest):
        return workspace.review(finding_id, body.verdict, body.comment)

    @app.post("/v1/categories/{category}/retrain")
    def retrain(category: str, body: RetrainRequest):
        overrides = {
            k: v
            for k, v in body.model_dump().items()
            if v is not None and k not in ("classifier", "c", "seed")
        }
        hp = Hyperparams(
            seed=body.seed if body.seed is not None else workspace.default_seed, **overrides
        )
        clf_params = {"c": body.c} if body.c is not None else None
        version = workspace.retrain_category(category, hp, body.classifier, clf_params)
        return {"category": category, "version": version, "model_version": f"v{version}"}

    @app.get("/v1/categories")
    def categories():
        out = []
        for c in workspace.categories():
            v = workspace.registry.latest_version(c)
            out.append({"name": c, "model_version": f"v{v}" if v else None})
        return {"categories": out}

    @app.post("/v1/examples", status_code=201)
    def add_manual_example(body: ManualExampleRequest):
        return workspace.add_manual(body.text, body.category, body.label)

    @app.get("/v1/documents/{doc_id}/export")
    def export(doc_id: str, format: str = "csv"):
        content = workspace.export(doc_id, format)
        media = "text/csv" if format == "csv" else "text/plain"
        return PlainTextResponse(content, media_type=media)

    return app
