"""Summarizer backends: a pretrained encoder-decoder (HuggingFace) and a toy.

A backend owns the vocabulary, encodes a source text into a reusable session
state, and answers per-step queries with natural-log next-token probabilities
over the full vocabulary plus an L2-normalized representation of the last
consumed token. All computation is deterministic.

The toy backend exists so that the protocol and the decoding bridge can be
exercised without model weights: it serves an add-one-smoothed bigram table
fitted on a corpus file, with the session text's own bigrams weighted in, so
outputs do depend on the source document.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"


@dataclass
class EncodedSource:
    state: object
    truncated: bool
    source_len: int


class ToySummarizer:
    """Deterministic bigram stand-in for a pretrained summarizer."""

    def __init__(self, corpus_path, max_source_len=1024, session_boost=3.0, d=16, seed=0):
        texts = _read_texts(corpus_path)
        words = sorted({t for text in texts for t in text.split()})
        if not words:
            raise ValueError(f"{corpus_path}: no tokens found")
        self.tokens = (BOS_TOKEN, EOS_TOKEN, *words)
        self._index = {t: i for i, t in enumerate(self.tokens)}
        self.max_source_len = max_source_len
        self.session_boost = session_boost
        size = len(self.tokens)
        self._counts = np.zeros((size, size), dtype=np.float64)
        for text in texts:
            ids = [self._index[t] for t in text.split()]
            seq = [self.bos_id, *ids, self.eos_id]
            for a, b in zip(seq, seq[1:]):
                self._counts[a, b] += 1.0
        rng = np.random.default_rng(seed)
        emb = rng.standard_normal((size, d))
        self._emb = emb / np.linalg.norm(emb, axis=1, keepdims=True)
        digest = hashlib.sha256("\x00".join(self.tokens).encode("utf-8")).hexdigest()[:8]
        self.model_id = f"toy-bigram-{digest}"

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    @property
    def bos_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    def encode(self, text: str) -> EncodedSource:
        all_ids = [self._index[t] for t in text.split() if t in self._index]
        truncated = len(all_ids) > self.max_source_len
        ids = all_ids[: self.max_source_len]
        counts = self._counts.copy()
        seq = [self.bos_id, *ids, self.eos_id]
        for a, b in zip(seq, seq[1:]):
            counts[a, b] += self.session_boost
        row_totals = counts.sum(axis=1, keepdims=True)
        log_probs = np.log((counts + 1.0) / (row_totals + self.vocab_size))
        return EncodedSource(state=log_probs, truncated=truncated, source_len=len(ids))

    def step(self, state, prefix):
        last = prefix[-1] if prefix else self.bos_id
        return state[last], self._emb[last]

    def detokenize(self, token_ids) -> str:
        return " ".join(self.tokens[t] for t in token_ids if t > 1)


class HfSummarizer:
    """Pretrained encoder-decoder summarizer (BART family) behind the protocol.

    Serves per-step log-softmax logits and the final decoder layer's hidden
    state at the last position, L2-normalized. Requires torch/transformers
    and model weights available locally or downloadable.
    """

    def __init__(self, model_id, max_source_len=1024, device="cpu"):
        import torch
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self._torch = torch
        self.model_id = model_id
        self.max_source_len = max_source_len
        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForSeq2SeqLM.from_pretrained(model_id).to(device).eval()
        self._device = device
        config = self._model.config
        self._decoder_start = config.decoder_start_token_id
        self._vocab_size = config.vocab_size
        self._bos = config.bos_token_id
        self._eos = config.eos_token_id

    @property
    def vocab_size(self) -> int:
        return self._vocab_size

    @property
    def bos_id(self) -> int:
        return self._bos

    @property
    def eos_id(self) -> int:
        return self._eos

    def encode(self, text: str) -> EncodedSource:
        torch = self._torch
        full = self._tokenizer(text, return_tensors="pt", truncation=False)
        n_tokens = full["input_ids"].shape[1]
        truncated = n_tokens > self.max_source_len
        batch = self._tokenizer(
            text, return_tensors="pt", truncation=True, max_length=self.max_source_len
        ).to(self._device)
        with torch.no_grad():
            encoder_outputs = self._model.get_encoder()(**batch)
        state = (encoder_outputs, batch["attention_mask"])
        return EncodedSource(
            state=state, truncated=truncated, source_len=min(n_tokens, self.max_source_len)
        )

    def step(self, state, prefix):
        torch = self._torch
        encoder_outputs, attention_mask = state
        decoder_ids = torch.tensor(
            [[self._decoder_start, *prefix]], dtype=torch.long, device=self._device
        )
        with torch.no_grad():
            out = self._model(
                encoder_outputs=encoder_outputs,
                attention_mask=attention_mask,
                decoder_input_ids=decoder_ids,
                output_hidden_states=True,
            )
            log_probs = torch.log_softmax(out.logits[0, -1].double(), dim=-1)
            hidden = out.decoder_hidden_states[-1][0, -1].double()
            hidden = hidden / hidden.norm()
        return log_probs.cpu().numpy(), hidden.cpu().numpy()

    def detokenize(self, token_ids) -> str:
        return self._tokenizer.decode(list(token_ids), skip_special_tokens=True).strip()


def _read_texts(path) -> list[str]:
    """Corpus file for the toy backend: JSONL with a text field, or raw lines."""
    path = Path(path)
    texts = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            record = json.loads(line)
            texts.append(str(record.get("text", "")))
        else:
            texts.append(line)
    return [t for t in texts if t.strip()]


def load_backend(model_spec: str, max_source_len: int = 1024, device: str = "cpu", seed: int = 0):
    """Build a backend from a model spec: 'toy:<corpus file>' or an HF model id/path."""
    if model_spec.startswith("toy:"):
        return ToySummarizer(model_spec[4:], max_source_len=max_source_len, seed=seed)
    return HfSummarizer(model_spec, max_source_len=max_source_len, device=device)
