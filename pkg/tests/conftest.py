"""Shared synthetic-corpus builders for the end-to-end test surfaces."""

import numpy as np

from riskvec.corpus import LabeledParagraph

RISK_CATEGORY = "Termination"

# Two disjoint topic vocabularies: risk-flavored terms and neutral filler.
RISK_WORDS = [
    "terminate", "termination", "notice", "breach", "default", "cancel",
    "expiry", "cure", "remedy", "forthwith", "rescind", "dissolve",
    "liquidated", "damages", "penalty", "forfeit", "revoke", "cease",
    "windup", "insolvency", "receiver", "bankruptcy", "suspend", "lapse",
]
NEUTRAL_WORDS = [
    "schedule", "meeting", "report", "quarterly", "office", "supplies",
    "invoice", "travel", "budget", "training", "printer", "catering",
    "holiday", "parking", "newsletter", "survey", "workshop", "agenda",
    "reception", "lobby", "plant", "window", "coffee", "desk",
]


def topic_text(rng: np.random.Generator, words: list[str], length: int) -> str:
    """A paragraph drawn from one topic's vocabulary with a Zipf-ish tilt."""
    ranks = np.arange(1, len(words) + 1, dtype=np.float64)
    weights = 1.0 / ranks
    weights /= weights.sum()
    picks = rng.choice(len(words), size=length, p=weights)
    return " ".join(words[i] for i in picks)


def two_topic_records(
    n_paragraphs: int,
    seed: int,
    length: int = 30,
    doc_id: str = "seed",
) -> list[LabeledParagraph]:
    """Alternating risk/neutral paragraphs; risk ones tagged RISK_CATEGORY."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_paragraphs):
        risky = i % 2 == 0
        words = RISK_WORDS if risky else NEUTRAL_WORDS
        records.append(
            LabeledParagraph(
                paragraph_id=f"{doc_id}-{i:04d}",
                doc_id=doc_id,
                text=topic_text(rng, words, length),
                categories=frozenset({RISK_CATEGORY}) if risky else frozenset(),
            )
        )
    return records


def corpus_ndjson(records: list[LabeledParagraph]) -> str:
    import json

    lines = [
        json.dumps(
            {
                "doc_id": r.doc_id,
                "paragraph_id": r.paragraph_id,
                "text": r.text,
                "categories": sorted(r.categories),
            }
        )
        for r in records
    ]
    return "".join(line + "\n" for line in lines)
