"""Analysis, review feedback, retraining and export."""

import numpy as np
import pytest

from conftest import (
    NEUTRAL_WORDS,
    RISK_CATEGORY,
    RISK_WORDS,
    topic_text,
    two_topic_records,
)
from riskvec.embedding import Hyperparams
from riskvec.pipeline import (
    Finding,
    ModelRegistry,
    TrainingStore,
    add_manual_example,
    analyze_document,
    export_report,
    parse_report_csv,
    record_review,
    render_csv_rows,
    retrain,
    training_records_for,
)

FAST_HP = Hyperparams(
    architecture="dbow", dim=12, window=2, negative=3, subsample=0.0,
    epochs=10, min_count=1, seed=21, lr_start=0.05,
)


def seeded_store(n=40, length=16, seed=3, path=None):
    store = TrainingStore(path)
    for r in two_topic_records(n, seed=seed, length=length):
        store.append(
            paragraph_id=r.paragraph_id,
            doc_id=r.doc_id,
            text=r.text,
            category=RISK_CATEGORY,
            label=1 if r.categories else 0,
            origin="seed-data",
        )
    return store


@pytest.fixture(scope="module")
def trained_registry():
    registry = ModelRegistry()
    retrain(RISK_CATEGORY, registry, seeded_store(60, 20), FAST_HP)
    return registry


class TestTrainingStore:
    def test_appends_are_persisted_and_reloaded(self, tmp_path):
        path = tmp_path / "store.ndjson"
        store = seeded_store(6, path=path)
        assert len(store) == 6
        reloaded = TrainingStore(path)
        assert len(reloaded) == 6
        assert reloaded.records == store.records

    def test_invalid_origin_rejected(self):
        store = TrainingStore()
        with pytest.raises(ValueError, match="origin"):
            store.append(paragraph_id="p", doc_id="d", text="t",
                         category=RISK_CATEGORY, label=1, origin="drive-by")

    def test_review_records_require_finding(self):
        store = TrainingStore()
        with pytest.raises(ValueError, match="finding"):
            store.append(paragraph_id="p", doc_id="d", text="t",
                         category=RISK_CATEGORY, label=1, origin="review-accept")

    def test_category_labels_last_record_wins(self):
        store = TrainingStore()
        store.append(paragraph_id="p", doc_id="d", text="t",
                     category=RISK_CATEGORY, label=1, origin="seed-data")
        store.append(paragraph_id="p", doc_id="d", text="t",
                     category=RISK_CATEGORY, label=0, origin="manual-add")
        assert store.category_labels(RISK_CATEGORY) == {"p": 0}

    def test_records_view_is_immutable(self):
        store = seeded_store(3)
        records = store.records
        assert isinstance(records, tuple)


class TestModelRegistry:
    def test_publish_increments_version(self):
        registry = ModelRegistry()
        assert registry.publish("A", b"emb1", b"clf1") == 1
        assert registry.publish("A", b"emb2", b"clf2") == 2
        assert registry.latest_version("A") == 2
        assert registry.versions("A") == [1, 2]

    def test_published_versions_immutable(self):
        registry = ModelRegistry()
        registry.publish("A", b"emb1", b"clf1")
        registry.publish("A", b"emb2", b"clf2")
        v1 = registry.get_bytes("A", 1)
        assert v1.embedding_bytes == b"emb1" and v1.classifier_bytes == b"clf1"

    def test_latest_resolution(self):
        registry = ModelRegistry()
        registry.publish("A", b"e", b"c")
        assert registry.get_bytes("A", "latest").version == 1

    def test_missing_model_raises(self):
        registry = ModelRegistry()
        with pytest.raises(KeyError):
            registry.get_bytes("A")

    def test_disk_round_trip(self, tmp_path):
        registry = ModelRegistry(tmp_path / "models")
        registry.publish("Risk Purchase", b"emb", b"clf")
        reloaded = ModelRegistry(tmp_path / "models")
        assert reloaded.versions("Risk Purchase") == [1]
        assert reloaded.get_bytes("Risk Purchase").embedding_bytes == b"emb"


def planted_document(rng=None):
    rng = rng or np.random.default_rng(42)
    planted = {2, 9, 15}
    paragraphs = []
    for i in range(20):
        words = RISK_WORDS if i in planted else NEUTRAL_WORDS
        paragraphs.append((f"doc-p{i:02d}", topic_text(rng, words, 16)))
    return paragraphs, {f"doc-p{i:02d}" for i in planted}


class TestAnalyzeDocument:
    def test_empty_document(self, trained_registry):
        findings, warnings = analyze_document("doc", [], [RISK_CATEGORY], trained_registry)
        assert findings == [] and warnings == []

    def test_threshold_zero_flags_every_pair(self, trained_registry):
        paragraphs, _ = planted_document()
        findings, _ = analyze_document(
            "doc", paragraphs, [RISK_CATEGORY], trained_registry, threshold=0.0, infer_epochs=4
        )
        assert len(findings) == len(paragraphs)

    def test_planted_risk_paragraphs_flagged(self, trained_registry):
        """Exactly the 3 planted risk paragraphs clear threshold 0.5."""
        paragraphs, planted = planted_document()
        findings, warnings = analyze_document(
            "doc", paragraphs, [RISK_CATEGORY], trained_registry, threshold=0.5, infer_epochs=10
        )
        assert {f.paragraph_id for f in findings} == planted
        assert warnings == []

    def test_sorted_by_descending_probability(self, trained_registry):
        paragraphs, _ = planted_document()
        findings, _ = analyze_document(
            "doc", paragraphs, [RISK_CATEGORY], trained_registry, threshold=0.0, infer_epochs=4
        )
        probs = [f.probability for f in findings]
        assert probs == sorted(probs, reverse=True)

    def test_pure_function_of_inputs(self, trained_registry):
        paragraphs, _ = planted_document()
        a, _ = analyze_document("doc", paragraphs, [RISK_CATEGORY], trained_registry, 0.3, 5)
        b, _ = analyze_document("doc", paragraphs, [RISK_CATEGORY], trained_registry, 0.3, 5)
        assert a == b

    def test_uninferable_paragraph_warns_not_fails(self, trained_registry):
        paragraphs = [("p-ok", " ".join(RISK_WORDS[:10])), ("p-oov", "zzz qqq xxx")]
        findings, warnings = analyze_document(
            "doc", paragraphs, [RISK_CATEGORY], trained_registry, threshold=0.0, infer_epochs=4
        )
        assert [w["paragraph_id"] for w in warnings] == ["p-oov"]
        assert {f.paragraph_id for f in findings} == {"p-ok"}

    def test_unmodeled_category_errors(self, trained_registry):
        with pytest.raises(KeyError, match="no model"):
            analyze_document("doc", [], ["Unmodeled"], trained_registry)

    def test_bad_threshold_errors(self, trained_registry):
        with pytest.raises(ValueError, match="threshold"):
            analyze_document("doc", [], [RISK_CATEGORY], trained_registry, threshold=1.5)


def make_finding(i=0, status="pending"):
    return Finding(
        finding_id=f"f{i:03d}",
        paragraph_id=f"p{i:03d}",
        doc_id="doc",
        category=RISK_CATEGORY,
        probability=0.9,
        status=status,
        model_version="v1",
    )


class TestRecordReview:
    def test_accept_appends_positive(self):
        store = TrainingStore()
        updated = record_review(make_finding(), "some text", "accept", store, "looks right")
        assert updated.status == "accepted"
        assert updated.comment == "looks right"
        assert len(store) == 1
        record = store.records[0]
        assert record.label == 1
        assert record.origin == "review-accept"
        assert record.finding_id == "f000"

    def test_reject_appends_negative(self):
        store = TrainingStore()
        updated = record_review(make_finding(), "some text", "reject", store)
        assert updated.status == "rejected"
        assert store.records[0].label == 0
        assert store.records[0].origin == "review-reject"

    def test_double_review_rejected(self):
        store = TrainingStore()
        once = record_review(make_finding(), "text", "reject", store)
        with pytest.raises(ValueError, match="already reviewed"):
            record_review(once, "text", "accept", store)
        assert len(store) == 1

    def test_bad_verdict_rejected(self):
        store = TrainingStore()
        with pytest.raises(ValueError, match="verdict"):
            record_review(make_finding(), "text", "decline", store)

    def test_mixed_verdict_ledger_counts(self):
        """10 verdicts append exactly 10 records with matching polarity."""
        store = TrainingStore()
        rng = np.random.default_rng(1)
        verdicts = ["accept" if rng.random() < 0.5 else "reject" for _ in range(10)]
        for i, verdict in enumerate(verdicts):
            record_review(make_finding(i), f"text {i}", verdict, store)
        assert len(store) == 10
        accepted = sum(1 for r in store.records if r.label == 1)
        assert accepted == verdicts.count("accept")
        assert all(r.finding_id == f"f{i:03d}" for i, r in enumerate(store.records))


class TestManualExamples:
    def test_valid_add_grows_store(self):
        store = TrainingStore()
        add_manual_example(
            store, [RISK_CATEGORY], paragraph_id="m1", doc_id="d",
            text="terminate forthwith", category=RISK_CATEGORY,
        )
        assert len(store) == 1
        assert store.records[0].origin == "manual-add"

    def test_unregistered_category_rejected(self):
        store = TrainingStore()
        with pytest.raises(ValueError, match="not registered"):
            add_manual_example(
                store, [RISK_CATEGORY], paragraph_id="m1", doc_id="d",
                text="whatever", category="Unknown",
            )
        assert len(store) == 0


RETRAIN_HP = Hyperparams(
    architecture="dbow", dim=8, window=2, negative=2, subsample=0.0,
    epochs=4, min_count=1, seed=7, lr_start=0.05,
)


class TestRetrain:
    def test_zero_new_records_reproduces_model_bytes(self):
        """Same store and seed publish byte-identical artifacts as v1 and v2."""
        store = seeded_store(20, length=12)
        registry = ModelRegistry()
        retrain(RISK_CATEGORY, registry, store, RETRAIN_HP)
        retrain(RISK_CATEGORY, registry, store, RETRAIN_HP)
        v1 = registry.get_bytes(RISK_CATEGORY, 1)
        v2 = registry.get_bytes(RISK_CATEGORY, 2)
        assert v1.embedding_bytes == v2.embedding_bytes
        assert v1.classifier_bytes == v2.classifier_bytes
        assert (v1.version, v2.version) == (1, 2)

    def test_accepts_increase_positive_count(self):
        """5 accepted findings add exactly 5 positives for the category."""
        store = seeded_store(20, length=12)
        registry = ModelRegistry()
        retrain(RISK_CATEGORY, registry, store, RETRAIN_HP)
        _, clf_v1, _ = registry.get(RISK_CATEGORY, 1)

        rng = np.random.default_rng(5)
        for i in range(5):
            finding = Finding(
                finding_id=f"rev{i}", paragraph_id=f"new-{i}", doc_id="doc",
                category=RISK_CATEGORY, probability=0.8, model_version="v1",
            )
            record_review(finding, topic_text(rng, RISK_WORDS, 12), "accept", store)
        retrain(RISK_CATEGORY, registry, store, RETRAIN_HP)
        _, clf_v2, _ = registry.get(RISK_CATEGORY, 2)
        assert clf_v2.n_pos == clf_v1.n_pos + 5
        assert clf_v2.n_neg == clf_v1.n_neg

    def test_manual_add_grows_training_set_by_one(self):
        store = seeded_store(20, length=12)
        before = len(training_records_for(store, RISK_CATEGORY))
        add_manual_example(
            store, [RISK_CATEGORY], paragraph_id="extra", doc_id="d",
            text="terminate breach notice", category=RISK_CATEGORY,
        )
        after = len(training_records_for(store, RISK_CATEGORY))
        assert after == before + 1

    def test_prior_version_untouched_and_latest_advances(self):
        store = seeded_store(20, length=12)
        registry = ModelRegistry()
        retrain(RISK_CATEGORY, registry, store, RETRAIN_HP)
        v1_bytes = registry.get_bytes(RISK_CATEGORY, 1).embedding_bytes
        add_manual_example(
            store, [RISK_CATEGORY], paragraph_id="extra", doc_id="d",
            text="terminate breach notice cure", category=RISK_CATEGORY,
        )
        retrain(RISK_CATEGORY, registry, store, RETRAIN_HP)
        assert registry.get_bytes(RISK_CATEGORY, 1).embedding_bytes == v1_bytes
        assert registry.get_bytes(RISK_CATEGORY, "latest").version == 2

    def test_empty_store_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            retrain(RISK_CATEGORY, ModelRegistry(), TrainingStore(), RETRAIN_HP)


class TestExportReport:
    DOC = {"doc_id": "doc1", "title": "Master Services Agreement"}

    def findings(self):
        return [
            Finding("f1", "p1", "doc1", RISK_CATEGORY, 0.9375, "accepted", "clear breach", "v2"),
            Finding("f2", "p2", "doc1", RISK_CATEGORY, 0.75, "pending", "", "v2"),
            Finding("f3", "p3", "doc1", RISK_CATEGORY, 0.625, "rejected", "boilerplate, ok", "v2"),
        ]

    TEXTS = {"p1": "terminate forthwith", "p2": "notice of breach", "p3": "schedule a meeting"}

    def test_empty_report_keeps_document_header(self):
        text = export_report(self.DOC, [], "text", {})
        assert "doc1" in text and "Findings: 0" in text
        csv_out = export_report(self.DOC, [], "csv", {})
        assert csv_out.splitlines()[0].startswith("doc_id,finding_id")
        assert len(csv_out.splitlines()) == 1

    def test_csv_round_trip_byte_identical(self):
        out = export_report(self.DOC, self.findings(), "csv", self.TEXTS)
        rows = parse_report_csv(out)
        assert render_csv_rows(rows) == out

    def test_rows_match_findings_exactly(self):
        out = export_report(self.DOC, self.findings(), "csv", self.TEXTS)
        rows = parse_report_csv(out)
        assert len(rows) == 3
        for row, f in zip(rows, self.findings()):
            assert row["finding_id"] == f.finding_id
            assert float(row["probability"]) == f.probability
            assert row["status"] == f.status
            assert row["comment"] == f.comment
            assert row["paragraph_text"] == self.TEXTS[f.paragraph_id]

    def test_unicode_comments_survive(self):
        finding = Finding("f1", "p1", "doc1", RISK_CATEGORY, 0.5, "accepted", "approuvé ✓", "v1")
        out = export_report(self.DOC, [finding], "csv", self.TEXTS)
        assert parse_report_csv(out)[0]["comment"] == "approuvé ✓"

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError, match="format"):
            export_report(self.DOC, [], "pdf", {})
