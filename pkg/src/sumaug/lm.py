"""Step-model contract shared by all decoders, plus a deterministic toy bigram LM.

A step model maps (conditioning context, generated prefix) to next-token
log-probabilities and a hidden representation of the last consumed token.
The toy model makes every decoder testable in-process: it conditions only on
the last prefix token, so exhaustive enumeration of its output space is cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    bos_id: int
    eos_id: int

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be distinct")
        if self.bos_id == self.eos_id:
            raise ValueError("bos_id and eos_id must differ")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def to_text(self, token_ids: Sequence[int]) -> str:
        """Render token ids as a whitespace-joined string, dropping BOS/EOS."""
        special = (self.bos_id, self.eos_id)
        return " ".join(self.tokens[t] for t in token_ids if t not in special)


@dataclass(frozen=True)
class StepOutput:
    log_probs: np.ndarray
    representation: np.ndarray


class StepModel(Protocol):
    """Deterministic next-token distribution provider consumed by decoders."""

    @property
    def vocab_size(self) -> int: ...

    @property
    def bos_id(self) -> int: ...

    @property
    def eos_id(self) -> int: ...

    def step(self, context: str, prefix: Sequence[int]) -> StepOutput: ...


@dataclass(frozen=True)
class ToyLm:
    """Add-one-smoothed bigram model with seeded unit-norm token embeddings.

    Conditions on the last prefix token only and ignores the context argument,
    which keeps brute-force decoding oracles tractable.
    """

    vocab: Vocabulary
    bigram_log_probs: np.ndarray
    embeddings: np.ndarray

    @property
    def vocab_size(self) -> int:
        return self.vocab.size

    @property
    def bos_id(self) -> int:
        return self.vocab.bos_id

    @property
    def eos_id(self) -> int:
        return self.vocab.eos_id

    def step(self, context: str, prefix: Sequence[int]) -> StepOutput:
        last = self.vocab.bos_id if len(prefix) == 0 else prefix[-1]
        return StepOutput(
            log_probs=self.bigram_log_probs[last],
            representation=self.embeddings[last],
        )

    def detokenize(self, token_ids: Sequence[int]) -> str:
        return self.vocab.to_text(token_ids)


def build_toy_lm(corpus_texts: Sequence[str], d: int = 16, seed: int = 0) -> ToyLm:
    """Fit a bigram ToyLm on whitespace-tokenized texts.

    Transition probabilities are add-one smoothed over the full vocabulary
    (BOS and EOS included), so every row is a proper distribution and no
    sequence has -inf score.
    """
    if not corpus_texts:
        raise ValueError("corpus_texts must be non-empty")
    tokenized = [text.split() for text in corpus_texts]
    word_set = {tok for toks in tokenized for tok in toks}
    if not word_set:
        raise ValueError("corpus_texts contain no tokens")
    if BOS_TOKEN in word_set or EOS_TOKEN in word_set:
        raise ValueError(f"corpus texts may not contain {BOS_TOKEN!r} or {EOS_TOKEN!r}")
    tokens = (BOS_TOKEN, EOS_TOKEN, *sorted(word_set))
    vocab = Vocabulary(tokens=tokens, bos_id=0, eos_id=1)
    index = {tok: i for i, tok in enumerate(tokens)}

    v = vocab.size
    counts = np.zeros((v, v), dtype=np.float64)
    for toks in tokenized:
        ids = [index[t] for t in toks]
        seq = [vocab.bos_id, *ids, vocab.eos_id]
        for a, b in zip(seq, seq[1:]):
            counts[a, b] += 1.0
    row_totals = counts.sum(axis=1, keepdims=True)
    probs = (counts + 1.0) / (row_totals + v)
    rng = np.random.default_rng(seed)
    emb = rng.standard_normal((v, d))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    return ToyLm(vocab=vocab, bigram_log_probs=np.log(probs), embeddings=emb)


def step(model: StepModel, context: str, prefix: Sequence[int]) -> StepOutput:
    """Query the model for the next position, validating prefix token ids."""
    size = model.vocab_size
    for tok in prefix:
        if not 0 <= tok < size:
            raise ValueError(f"token id {tok} out of range for vocabulary of size {size}")
    return model.step(context, prefix)
