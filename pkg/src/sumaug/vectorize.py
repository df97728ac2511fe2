"""TF-IDF n-gram featurization with fully pinned semantics.

Tokens are lowercased maximal runs of word characters of length >= 2,
document frequency filtering uses exact rational comparison for the max_df
proportion, idf is the smoothed ln((1 + N) / (1 + df)) + 1, term frequency is
the raw count, and every nonzero vector is L2-normalized. The vocabulary is
indexed in lexicographic n-gram order so feature ids are deterministic.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

_TOKEN_RE = re.compile(r"\w\w+", re.UNICODE)

TFIDF_FORMAT_VERSION = 1


class VectorizeError(ValueError):
    pass


@dataclass(frozen=True)
class TfidfConfig:
    ngram_range: tuple[int, int] = (1, 3)
    min_df: int = 3
    max_df: float = 0.9

    def __post_init__(self):
        lo, hi = self.ngram_range
        if not 1 <= lo <= hi:
            raise VectorizeError(f"invalid ngram_range {self.ngram_range}")
        if self.min_df < 1:
            raise VectorizeError("min_df must be >= 1")
        if not 0 < self.max_df <= 1:
            raise VectorizeError("max_df must be a proportion in (0, 1]")


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray
    dim: int

    @property
    def nnz(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    ngram_range: tuple[int, int]
    min_df: int
    max_df: float
    n_docs_fitted: int

    @property
    def dim(self) -> int:
        return len(self.vocabulary)


def tokenize_text(s: str) -> list[str]:
    """Lowercase and split on non-word characters, dropping 1-char tokens."""
    return _TOKEN_RE.findall(s.lower())


def extract_ngrams(tokens: Sequence[str], ngram_range: tuple[int, int]) -> list[str]:
    """All contiguous n-grams for n in the range, space-joined, with repeats."""
    lo, hi = ngram_range
    if not 1 <= lo <= hi:
        raise VectorizeError(f"invalid ngram_range {ngram_range}")
    out = []
    for n in range(lo, min(hi, len(tokens)) + 1):
        for i in range(len(tokens) - n + 1):
            out.append(" ".join(tokens[i : i + n]))
    return out


def _within_max_df(df: int, n_docs: int, max_df: float) -> bool:
    # Exact rational comparison: df / n_docs <= max_df without float drift.
    limit = Fraction(str(max_df))
    return df * limit.denominator <= limit.numerator * n_docs


def fit(documents: Sequence[str], cfg: TfidfConfig = TfidfConfig()) -> TfidfModel:
    """Fit vocabulary, document frequencies, and idf weights on raw strings."""
    if not documents:
        raise VectorizeError("cannot fit on an empty document list")
    n_docs = len(documents)
    df: Counter[str] = Counter()
    for doc in documents:
        df.update(set(extract_ngrams(tokenize_text(doc), cfg.ngram_range)))
    retained = sorted(
        t
        for t, count in df.items()
        if count >= cfg.min_df and _within_max_df(count, n_docs, cfg.max_df)
    )
    if not retained:
        raise VectorizeError(
            f"no n-gram satisfies min_df={cfg.min_df}, max_df={cfg.max_df}; "
            "lower min_df or raise max_df"
        )
    vocabulary = {t: i for i, t in enumerate(retained)}
    df_vec = np.array([df[t] for t in retained], dtype=np.float64)
    idf = np.log((1.0 + n_docs) / (1.0 + df_vec)) + 1.0
    return TfidfModel(
        vocabulary=vocabulary,
        idf=idf,
        ngram_range=cfg.ngram_range,
        min_df=cfg.min_df,
        max_df=cfg.max_df,
        n_docs_fitted=n_docs,
    )


def transform(model: TfidfModel, document: str) -> SparseVector:
    """TF-IDF vector of one document; out-of-vocabulary n-grams are ignored."""
    counts = Counter(extract_ngrams(tokenize_text(document), model.ngram_range))
    items = sorted(
        (model.vocabulary[t], tf) for t, tf in counts.items() if t in model.vocabulary
    )
    if not items:
        return SparseVector(
            indices=np.empty(0, dtype=np.int64),
            values=np.empty(0, dtype=np.float64),
            dim=model.dim,
        )
    indices = np.array([i for i, _ in items], dtype=np.int64)
    values = np.array([tf for _, tf in items], dtype=np.float64) * model.idf[indices]
    values /= np.linalg.norm(values)
    return SparseVector(indices=indices, values=values, dim=model.dim)


def transform_many(model: TfidfModel, documents: Sequence[str]) -> list[SparseVector]:
    return [transform(model, doc) for doc in documents]


def save_tfidf(model: TfidfModel, path) -> None:
    payload = {
        "format_version": TFIDF_FORMAT_VERSION,
        "ngram_range": list(model.ngram_range),
        "min_df": model.min_df,
        "max_df": model.max_df,
        "n_docs_fitted": model.n_docs_fitted,
        "vocabulary": list(model.vocabulary.keys()),  # index = list position
        "idf": model.idf.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def load_tfidf(path) -> TfidfModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != TFIDF_FORMAT_VERSION:
        raise VectorizeError(f"unsupported tf-idf model version {version!r}")
    vocab = {t: i for i, t in enumerate(payload["vocabulary"])}
    return TfidfModel(
        vocabulary=vocab,
        idf=np.array(payload["idf"], dtype=np.float64),
        ngram_range=tuple(payload["ngram_range"]),
        min_df=payload["min_df"],
        max_df=payload["max_df"],
        n_docs_fitted=payload["n_docs_fitted"],
    )
