"""Labeled document corpora: loading, class statistics, title composition, folds."""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

CORPUS_KEYS = ("id", "title", "text", "label")

_SENTENCE_FINAL = (".", "!", "?")


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus files."""


@dataclass(frozen=True)
class Document:
    """One labeled example: id, optional title, body text, event-type label."""

    id: str
    title: str
    text: str
    label: str

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError(f"document {self.id!r}: text is empty")


@dataclass(frozen=True)
class LabeledCorpus:
    documents: tuple[Document, ...]
    label_set: tuple[str, ...]

    @classmethod
    def from_documents(cls, documents) -> "LabeledCorpus":
        docs = tuple(documents)
        seen = set()
        for doc in docs:
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
        labels = tuple(sorted({d.label for d in docs}))
        return cls(documents=docs, label_set=labels)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def by_id(self) -> dict[str, Document]:
        return {d.id: d for d in self.documents}


@dataclass(frozen=True)
class ClassStats:
    counts: dict[str, int]
    low_resource_threshold: int = 500

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: dict[str, int]
    k: int

    def ids_in_fold(self, fold: int) -> list[str]:
        return [doc_id for doc_id, f in self.fold_of.items() if f == fold]


def load_corpus(path, format: str = "jsonl") -> LabeledCorpus:
    """Read a JSONL corpus file (one object per line, keys id/title/text/label).

    Unknown keys produce a warning and are dropped. Malformed lines, duplicate
    ids, and empty files raise CorpusError.
    """
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")
    documents = []
    unknown_seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in CORPUS_KEYS if k not in record]
            if missing:
                raise CorpusError(f"{path}:{lineno}: missing keys {missing}")
            unknown = set(record) - set(CORPUS_KEYS)
            new_unknown = unknown - unknown_seen
            if new_unknown:
                warnings.warn(
                    f"{path}:{lineno}: ignoring unknown keys {sorted(new_unknown)}",
                    stacklevel=2,
                )
                unknown_seen |= new_unknown
            try:
                doc = Document(
                    id=str(record["id"]),
                    title=str(record["title"]),
                    text=str(record["text"]),
                    label=str(record["label"]),
                )
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            documents.append(doc)
    if not documents:
        raise CorpusError(f"{path}: corpus file is empty")
    try:
        return LabeledCorpus.from_documents(documents)
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def save_corpus(corpus: LabeledCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            record = {"id": doc.id, "title": doc.title, "text": doc.text, "label": doc.label}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def class_stats(corpus: LabeledCorpus, threshold: int = 500) -> ClassStats:
    if len(corpus) == 0:
        raise CorpusError("cannot compute statistics for an empty corpus")
    if threshold < 1:
        raise CorpusError("threshold must be positive")
    counts = Counter(doc.label for doc in corpus.documents)
    return ClassStats(counts=dict(counts), low_resource_threshold=threshold)


def low_resource_labels(stats: ClassStats) -> set[str]:
    """Labels whose count is strictly below the threshold."""
    return {c for c, n in stats.counts.items() if n < stats.low_resource_threshold}


def compose_title_text(title: str, text: str) -> str:
    """Prepend the title as a first sentence, separated by a dot.

    No dot is inserted when the title already ends in sentence-final
    punctuation, and an empty title leaves the text unchanged.
    """
    title = title.strip()
    if not title:
        return text
    if title.endswith(_SENTENCE_FINAL):
        return f"{title} {text}"
    return f"{title}. {text}"


def stratified_folds(corpus: LabeledCorpus, k: int, seed: int) -> FoldAssignment:
    """Assign each document to one of k folds, preserving class proportions.

    Documents of each class are shuffled with a seeded generator and dealt
    round-robin, so per-class fold counts differ by at most one.
    """
    if k < 1:
        raise CorpusError("k must be positive")
    by_label: dict[str, list[str]] = {label: [] for label in corpus.label_set}
    for doc in corpus.documents:
        by_label[doc.label].append(doc.id)
    rng = np.random.default_rng(seed)
    fold_of: dict[str, int] = {}
    for label in corpus.label_set:
        ids = by_label[label]
        if len(ids) < k:
            raise CorpusError(
                f"class {label!r} has {len(ids)} documents, fewer than k={k}"
            )
        order = rng.permutation(len(ids))
        for slot, idx in enumerate(order):
            fold_of[ids[idx]] = slot % k
    return FoldAssignment(fold_of=fold_of, k=k)
