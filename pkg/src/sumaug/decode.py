"""Decoding strategies over the step-model contract.

Implements greedy, beam search, top-k sampling, top-p (nucleus) sampling, and
contrastive search, plus generation of n distinct outputs per input. All
tie-breaking is by lowest token id (or lexicographically smaller token
sequence), so results are reproducible across implementations.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lm

METHODS = ("greedy", "beam", "top_k", "top_p", "contrastive")

DEFAULT_TOP_K = 640
DEFAULT_CONTRASTIVE_K = 4
DEFAULT_TOP_P = 0.95
DEFAULT_ALPHA = 0.6
DEFAULT_MAX_LEN = 142
DEFAULT_MIN_LEN = 5


class DecodeConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecodeConfig:
    method: str
    num_beams: Optional[int] = None
    k: Optional[int] = None
    p: Optional[float] = None
    alpha: Optional[float] = None
    max_len: int = DEFAULT_MAX_LEN
    min_len: int = DEFAULT_MIN_LEN
    length_penalty: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise DecodeConfigError(f"unknown decoding method {self.method!r}")
        if self.max_len < 1:
            raise DecodeConfigError("max_len must be positive")
        if self.min_len < 0 or self.min_len > self.max_len:
            raise DecodeConfigError("min_len must lie in [0, max_len]")
        if self.length_penalty < 0:
            raise DecodeConfigError("length_penalty must be non-negative")
        if self.method == "beam":
            if self.num_beams is None or self.num_beams < 1:
                raise DecodeConfigError("beam decoding requires num_beams >= 1")
        if self.method == "top_k":
            if self.k is None:
                object.__setattr__(self, "k", DEFAULT_TOP_K)
            if self.k < 1:
                raise DecodeConfigError("top_k requires k >= 1")
        if self.method == "top_p":
            if self.p is None:
                object.__setattr__(self, "p", DEFAULT_TOP_P)
            if not 0 < self.p <= 1:
                raise DecodeConfigError("top_p requires p in (0, 1]")
        if self.method == "contrastive":
            if self.k is None:
                object.__setattr__(self, "k", DEFAULT_CONTRASTIVE_K)
            if self.k < 1:
                raise DecodeConfigError("contrastive search requires k >= 1")
            if self.alpha is None:
                object.__setattr__(self, "alpha", DEFAULT_ALPHA)
            if not 0 <= self.alpha <= 1:
                raise DecodeConfigError("contrastive search requires alpha in [0, 1]")


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    score: float
    normalized_score: float
    finished: bool


def _finish(tokens: tuple[int, ...], score: float, length_penalty: float) -> Hypothesis:
    normalized = score / (len(tokens) ** length_penalty)
    return Hypothesis(tokens=tokens, score=score, normalized_score=normalized, finished=True)


def _masked_log_probs(out: lm.StepOutput, n_generated: int, cfg: DecodeConfig, eos_id: int) -> np.ndarray:
    lp = np.asarray(out.log_probs, dtype=np.float64)
    if n_generated < cfg.min_len:
        lp = lp.copy()
        lp[eos_id] = -np.inf
    return lp


def _by_prob_then_id(log_probs: np.ndarray) -> np.ndarray:
    # Stable sort on descending probability keeps ascending token id for ties.
    return np.argsort(-log_probs, kind="stable")


def stable_hash64(s: str) -> int:
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "big")


def stream_rng(seed: int, stream_key: str, attempt: int) -> np.random.Generator:
    """Seed stream independent of execution order: one generator per attempt."""
    mixed = (seed ^ stable_hash64(stream_key) ^ attempt) & (2**64 - 1)
    return np.random.default_rng(mixed)


def greedy(model: lm.StepModel, context: str, cfg: DecodeConfig) -> Hypothesis:
    """Pick the argmax token at each step; ties resolve to the lowest token id."""
    if cfg.method != "greedy":
        raise DecodeConfigError(f"greedy called with method {cfg.method!r}")
    return _greedy_walk(model, context, cfg)


def _greedy_walk(model, context, cfg) -> Hypothesis:
    eos = model.eos_id
    tokens: tuple[int, ...] = ()
    score = 0.0
    for _ in range(cfg.max_len):
        lp = _masked_log_probs(lm.step(model, context, tokens), len(tokens), cfg, eos)
        choice = int(np.argmax(lp))
        score += float(lp[choice])
        tokens += (choice,)
        if choice == eos:
            break
    return _finish(tokens, score, cfg.length_penalty)


def beam_search(model: lm.StepModel, context: str, cfg: DecodeConfig) -> list[Hypothesis]:
    """Breadth-limited best-first search by cumulative log-probability.

    Finished hypotheses (EOS or length cap) move to a completed pool; the
    search stops once the pool holds num_beams hypotheses and no live beam
    can still beat the pool's worst normalized score. Returns the pool sorted
    by normalized score, ties broken by lexicographically smaller tokens.
    """
    if cfg.method != "beam":
        raise DecodeConfigError(f"beam_search called with method {cfg.method!r}")
    eos = model.eos_id
    width = cfg.num_beams
    lp_pen = cfg.length_penalty
    live: list[tuple[float, tuple[int, ...]]] = [(0.0, ())]
    pool: list[Hypothesis] = []
    for depth in range(cfg.max_len):
        rows = [
            _masked_log_probs(lm.step(model, context, toks), depth, cfg, eos)
            for _, toks in live
        ]
        scores = np.array([s for s, _ in live])[:, None] + np.stack(rows)
        flat = scores.ravel()
        vocab = scores.shape[1]
        if flat.size > width:
            kth = np.partition(flat, flat.size - width)[flat.size - width]
            keep = np.flatnonzero(flat >= kth)  # superset: boundary ties included
        else:
            keep = np.arange(flat.size)
        keep = keep[np.isfinite(flat[keep])]
        candidates = [
            (float(flat[i]), live[i // vocab][1] + (int(i % vocab),)) for i in keep
        ]
        candidates.sort(key=lambda c: (-c[0], c[1]))
        selected = candidates[:width]
        live = []
        for score, toks in selected:
            if toks[-1] == eos or len(toks) >= cfg.max_len:
                pool.append(_finish(toks, score, lp_pen))
            else:
                live.append((score, toks))
        if not live:
            break
        if len(pool) >= width:
            pool_sorted = sorted(pool, key=lambda h: -h.normalized_score)
            kth_normalized = pool_sorted[width - 1].normalized_score
            best_live = max(s for s, _ in live)
            optimistic = best_live / (cfg.max_len ** lp_pen)
            if optimistic <= kth_normalized:
                break
    pool.sort(key=lambda h: (-h.normalized_score, h.tokens))
    return pool


def _truncated_sample(log_probs: np.ndarray, candidate_ids: np.ndarray, rng: np.random.Generator) -> int:
    probs = np.exp(log_probs[candidate_ids])
    probs /= probs.sum()
    cum = np.cumsum(probs)
    j = int(np.searchsorted(cum, rng.random(), side="right"))
    return int(candidate_ids[min(j, len(candidate_ids) - 1)])


def top_k_sample(
    model: lm.StepModel, context: str, cfg: DecodeConfig, rng_stream: np.random.Generator
) -> Hypothesis:
    """Sample each step from the k most probable tokens, renormalized."""
    if cfg.method != "top_k":
        raise DecodeConfigError(f"top_k_sample called with method {cfg.method!r}")
    eos = model.eos_id
    tokens: tuple[int, ...] = ()
    score = 0.0
    for _ in range(cfg.max_len):
        lp = _masked_log_probs(lm.step(model, context, tokens), len(tokens), cfg, eos)
        order = _by_prob_then_id(lp)
        cands = order[: cfg.k]
        cands = cands[np.isfinite(lp[cands])]
        choice = _truncated_sample(lp, cands, rng_stream)
        score += float(lp[choice])
        tokens += (choice,)
        if choice == eos:
            break
    return _finish(tokens, score, cfg.length_penalty)


def top_p_candidates(log_probs: np.ndarray, p: float) -> np.ndarray:
    """Shortest probability-sorted prefix whose cumulative mass reaches p."""
    order = _by_prob_then_id(log_probs)
    probs = np.exp(log_probs[order])
    cum = np.cumsum(probs)
    # Tiny slack absorbs exp/log round-trip noise at exact boundaries.
    cut = int(np.searchsorted(cum, p - 1e-12, side="left")) + 1
    cut = min(cut, len(order))
    cands = order[:cut]
    return cands[np.isfinite(log_probs[cands])]


def top_p_sample(
    model: lm.StepModel, context: str, cfg: DecodeConfig, rng_stream: np.random.Generator
) -> Hypothesis:
    """Nucleus sampling: sample within the smallest prefix of mass >= p."""
    if cfg.method != "top_p":
        raise DecodeConfigError(f"top_p_sample called with method {cfg.method!r}")
    eos = model.eos_id
    tokens: tuple[int, ...] = ()
    score = 0.0
    for _ in range(cfg.max_len):
        lp = _masked_log_probs(lm.step(model, context, tokens), len(tokens), cfg, eos)
        cands = top_p_candidates(lp, cfg.p)
        choice = _truncated_sample(lp, cands, rng_stream)
        score += float(lp[choice])
        tokens += (choice,)
        if choice == eos:
            break
    return _finish(tokens, score, cfg.length_penalty)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(a)) * float(np.linalg.norm(b)), 1e-12)
    return float(np.dot(a, b)) / denom


def contrastive_search(model: lm.StepModel, context: str, cfg: DecodeConfig) -> Hypothesis:
    """Deterministic search balancing model confidence against repetition.

    Each step scores the top-k candidates with
    (1 - alpha) * P(v | prefix) - alpha * max_j cos(rep(v), rep(x_j)),
    where the maximum runs over representations of previously generated
    tokens (zero penalty when there is no history yet).
    """
    if cfg.method != "contrastive":
        raise DecodeConfigError(f"contrastive_search called with method {cfg.method!r}")
    return _contrastive_walk(model, context, cfg, force_first=None)


def first_step_candidates(model: lm.StepModel, context: str, cfg: DecodeConfig) -> list[int]:
    """Contrastive candidates at step 0, ranked by score (ties: lower id)."""
    lp = _masked_log_probs(lm.step(model, context, ()), 0, cfg, model.eos_id)
    order = _by_prob_then_id(lp)
    cands = order[: cfg.k]
    # No history at step 0, so the contrastive ranking is the probability ranking.
    return [int(v) for v in cands if np.isfinite(lp[v])]


def _contrastive_walk(model, context, cfg, force_first: Optional[int]) -> Hypothesis:
    eos = model.eos_id
    tokens: tuple[int, ...] = ()
    score = 0.0
    history: list[np.ndarray] = []
    for t in range(cfg.max_len):
        lp = _masked_log_probs(lm.step(model, context, tokens), t, cfg, eos)
        if t == 0 and force_first is not None:
            choice = force_first
            rep = lm.step(model, context, (choice,)).representation
        else:
            order = _by_prob_then_id(lp)
            cands = [int(v) for v in order[: cfg.k] if np.isfinite(lp[v])]
            probs = np.exp(lp)
            choice = -1
            best = -np.inf
            rep = None
            for v in cands:
                probe = lm.step(model, context, tokens + (v,))
                penalty = max((_cosine(probe.representation, h) for h in history), default=0.0)
                s = (1.0 - cfg.alpha) * float(probs[v]) - cfg.alpha * penalty
                if s > best or (s == best and v < choice):
                    best, choice, rep = s, v, probe.representation
        score += float(lp[choice])
        tokens += (choice,)
        history.append(np.asarray(rep, dtype=np.float64))
        if choice == eos:
            break
    return _finish(tokens, score, cfg.length_penalty)


def generate_n_distinct(
    model: lm.StepModel,
    context: str,
    cfg: DecodeConfig,
    n: int,
    stream_key: Optional[str] = None,
) -> list[tuple[int, ...]]:
    """Produce up to n distinct token sequences with the configured method.

    Beam search returns its n best completed hypotheses; samplers redraw with
    an advancing seed stream (at most 10*n attempts); contrastive search
    forces run i >= 2 to start from the i-th ranked first-step candidate.
    Emits a warning instead of failing when fewer than n distinct sequences
    exist.
    """
    if n < 1:
        raise DecodeConfigError("n must be positive")
    key = context if stream_key is None else stream_key
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []

    def add(tokens: tuple[int, ...]) -> None:
        if tokens not in seen:
            seen.add(tokens)
            out.append(tokens)

    if cfg.method == "beam":
        if cfg.num_beams < n:
            raise DecodeConfigError(f"num_beams={cfg.num_beams} cannot yield n={n} outputs")
        for hyp in beam_search(model, context, cfg)[:n]:
            add(hyp.tokens)
    elif cfg.method == "greedy":
        add(greedy(model, context, cfg).tokens)
    elif cfg.method in ("top_k", "top_p"):
        sampler = top_k_sample if cfg.method == "top_k" else top_p_sample
        for attempt in range(10 * n):
            if len(out) == n:
                break
            rng = stream_rng(cfg.seed, key, attempt)
            add(sampler(model, context, cfg, rng).tokens)
    else:  # contrastive
        add(_contrastive_walk(model, context, cfg, force_first=None).tokens)
        ranked = first_step_candidates(model, context, cfg)
        for i in range(1, n):
            if len(out) == n or i >= len(ranked):
                break
            add(_contrastive_walk(model, context, cfg, force_first=ranked[i]).tokens)

    if len(out) < n:
        warnings.warn(
            f"method {cfg.method!r} produced {len(out)} distinct sequences, requested {n}",
            stacklevel=2,
        )
    return out[:n]
