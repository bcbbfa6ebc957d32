"""Multi-domain stance corpus: ingestion, label standardization, prompts, splits.

Source datasets arrive with heterogeneous label inventories; everything is
standardized to the five-way scheme {Positive, Negative, Discuss, Other,
Neutral} at ingestion time. A Corpus is immutable after construction and safe
to share across threads.
"""

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DataError

logger = logging.getLogger(__name__)


class StanceLabel(Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    DISCUSS = "Discuss"
    OTHER = "Other"
    NEUTRAL = "Neutral"

    def __str__(self):
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "StanceLabel":
        for member in cls:
            if member.value == name:
                return member
        raise DataError(f"unknown stance label name: {name!r}")


# Canonical order used wherever a deterministic label iteration is needed
# (round-robin pools, metric rows, report columns).
LABEL_ORDER = (
    StanceLabel.POSITIVE,
    StanceLabel.NEGATIVE,
    StanceLabel.DISCUSS,
    StanceLabel.OTHER,
    StanceLabel.NEUTRAL,
)

# Hard mapping from raw source labels to the five-way scheme. Lookup is done
# on the lowercased, trimmed raw string. "comment" is claimed by two classes
# in the upstream inventories; we side with Discuss and let callers override
# per dataset.
HARD_LABEL_MAP = {
    "agree": StanceLabel.POSITIVE,
    "argument for": StanceLabel.POSITIVE,
    "for": StanceLabel.POSITIVE,
    "pro": StanceLabel.POSITIVE,
    "favor": StanceLabel.POSITIVE,
    "support": StanceLabel.POSITIVE,
    "endorse": StanceLabel.POSITIVE,
    "disagree": StanceLabel.NEGATIVE,
    "argument against": StanceLabel.NEGATIVE,
    "against": StanceLabel.NEGATIVE,
    "anti": StanceLabel.NEGATIVE,
    "con": StanceLabel.NEGATIVE,
    "undermine": StanceLabel.NEGATIVE,
    "deny": StanceLabel.NEGATIVE,
    "refute": StanceLabel.NEGATIVE,
    "discuss": StanceLabel.DISCUSS,
    "observing": StanceLabel.DISCUSS,
    "question": StanceLabel.DISCUSS,
    "query": StanceLabel.DISCUSS,
    "comment": StanceLabel.DISCUSS,
    "unrelated": StanceLabel.OTHER,
    "none": StanceLabel.OTHER,
    "neutral": StanceLabel.NEUTRAL,
    # canonical names map to themselves so standardization is idempotent
    "positive": StanceLabel.POSITIVE,
    "negative": StanceLabel.NEGATIVE,
    "other": StanceLabel.OTHER,
}


def standardize_label(raw: str, overrides: dict | None = None) -> StanceLabel:
    """Map a raw source label onto the five-way scheme.

    Matching is case-insensitive after trimming. `overrides` (raw -> label)
    takes precedence over the hard map; unknown labels raise DataError.
    """
    key = raw.strip().lower()
    if overrides:
        normalized = {k.strip().lower(): v for k, v in overrides.items()}
        if key in normalized:
            return normalized[key]
    try:
        return HARD_LABEL_MAP[key]
    except KeyError:
        raise DataError(f"unmappable raw label: {raw!r}") from None


@dataclass(frozen=True)
class Document:
    """One labeled text instance. text/topic are stored trimmed."""

    id: str
    dataset: str
    topic: str
    text: str
    raw_label: str
    label: StanceLabel

    def __post_init__(self):
        object.__setattr__(self, "text", self.text.strip())
        object.__setattr__(self, "topic", self.topic.strip())
        if not self.text:
            raise DataError(f"document {self.id!r}: empty text")
        if not self.topic:
            raise DataError(f"document {self.id!r}: empty topic")
        if not isinstance(self.label, StanceLabel):
            raise DataError(f"document {self.id!r}: label must be a StanceLabel")


def build_prompt(d: Document) -> str:
    """Premise/hypothesis prompt string for a document.

    Marker tokens are emitted as literal text; the document body is not
    escaped in any way.
    """
    return f"[CLS] premise: {d.text} hypothesis: {d.topic} [EOS]"


@dataclass(frozen=True)
class Corpus:
    documents: tuple
    datasets: frozenset = field(init=False)
    topics: Counter = field(init=False)

    def __post_init__(self):
        docs = tuple(self.documents)
        object.__setattr__(self, "documents", docs)
        seen = set()
        for d in docs:
            if d.id in seen:
                raise DataError(f"duplicate document id: {d.id!r}")
            seen.add(d.id)
        object.__setattr__(self, "datasets", frozenset(d.dataset for d in docs))
        object.__setattr__(self, "topics", Counter(d.topic for d in docs))

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def ids(self) -> list:
        return [d.id for d in self.documents]

    def by_id(self) -> dict:
        return {d.id: d for d in self.documents}

    def labels_by_id(self) -> dict:
        return {d.id: d.label for d in self.documents}


@dataclass
class RecordError:
    """A per-record ingestion failure that did not abort the whole file."""

    line: int
    message: str


@dataclass
class IngestResult:
    """Corpus fragment plus the record-level errors hit while reading it."""

    documents: list
    errors: list


def _iter_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, exc


def _iter_csv(path: Path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        # DictReader consumes the header as line 1
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def ingest_dataset(
    path,
    dataset_name: str,
    format: str = "jsonl",
    text_field: str = "text",
    topic_field: str = "topic",
    label_field: str = "label",
    id_field: str = "id",
    label_overrides: dict | None = None,
) -> IngestResult:
    """Read one source file into standardized Documents.

    Records missing a required field (or failing Document invariants) are
    collected as RecordErrors with their line number; an unmappable raw label
    aborts with a DataError naming the offending string. An empty file yields
    an empty fragment with a warning.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    if format == "jsonl":
        records = _iter_jsonl(path)
    elif format == "csv":
        records = _iter_csv(path)
    else:
        raise DataError(f"unknown ingestion format: {format!r}")

    documents, errors = [], []
    counter = 0
    for lineno, record in records:
        if isinstance(record, Exception):
            errors.append(RecordError(lineno, f"invalid JSON: {record}"))
            continue
        missing = [
            f for f in (text_field, topic_field, label_field)
            if record.get(f) in (None, "")
        ]
        if missing:
            errors.append(RecordError(lineno, f"missing field(s): {', '.join(missing)}"))
            continue
        raw_label = str(record[label_field])
        label = standardize_label(raw_label, overrides=label_overrides)
        # ids carry the dataset prefix so merged corpora cannot collide
        native = record.get(id_field) if id_field else None
        doc_id = f"{dataset_name}:{native}" if native not in (None, "") else f"{dataset_name}:{counter}"
        try:
            documents.append(
                Document(
                    id=str(doc_id),
                    dataset=dataset_name,
                    topic=str(record[topic_field]),
                    text=str(record[text_field]),
                    raw_label=raw_label,
                    label=label,
                )
            )
        except DataError as exc:
            errors.append(RecordError(lineno, str(exc)))
            continue
        counter += 1

    if not documents and not errors:
        logger.warning("dataset %s: file %s produced no records", dataset_name, path)
    return IngestResult(documents=documents, errors=errors)


def split_leave_one_out(c: Corpus, held_out: str):
    """Partition a corpus into (train, test) with one dataset held out."""
    if held_out not in c.datasets:
        raise DataError(f"unknown dataset to hold out: {held_out!r}")
    train_docs = [d for d in c.documents if d.dataset != held_out]
    test_docs = [d for d in c.documents if d.dataset == held_out]
    if not train_docs:
        logger.warning("held-out dataset %r leaves an empty training corpus", held_out)
    return Corpus(tuple(train_docs)), Corpus(tuple(test_docs))


def document_to_record(d: Document) -> dict:
    return {
        "id": d.id,
        "dataset": d.dataset,
        "topic": d.topic,
        "text": d.text,
        "raw_label": d.raw_label,
        "label": d.label.value,
    }


def write_corpus(c: Corpus, path) -> None:
    """Write the canonical JSONL form (one object per line, UTF-8)."""
    buf = io.StringIO()
    for d in c.documents:
        buf.write(json.dumps(document_to_record(d), ensure_ascii=False))
        buf.write("\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_corpus(path) -> Corpus:
    """Read a canonical corpus JSONL file."""
    docs = []
    for lineno, record in _iter_jsonl(Path(path)):
        if isinstance(record, Exception):
            raise DataError(f"{path}:{lineno}: invalid JSON: {record}")
        try:
            docs.append(
                Document(
                    id=record["id"],
                    dataset=record["dataset"],
                    topic=record["topic"],
                    text=record["text"],
                    raw_label=record.get("raw_label", record["label"]),
                    label=StanceLabel.from_name(record["label"]),
                )
            )
        except KeyError as exc:
            raise DataError(f"{path}:{lineno}: missing field {exc}") from None
    return Corpus(tuple(docs))
