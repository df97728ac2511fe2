"""Server-side reference beam decoding for the /v1/summarize cross-check path.

Scoring conventions shared with the decoding clients of this protocol:
cumulative natural-log probability, ranking by score / len^length_penalty,
ties broken toward the lexicographically smaller token sequence, EOS masked
while fewer than min_len tokens have been generated, and the search stopping
once no live beam's optimistic bound (score / max_len^length_penalty) can
beat the pool's num_beams-th normalized score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BeamParams:
    num_beams: int = 3
    max_len: int = 142
    min_len: int = 5
    length_penalty: float = 1.0

    @classmethod
    def from_mapping(cls, params: dict) -> "BeamParams":
        known = {f: params[f] for f in ("num_beams", "max_len", "min_len", "length_penalty") if f in params}
        bp = cls(**known)
        if bp.num_beams < 1 or bp.max_len < 1 or not 0 <= bp.min_len <= bp.max_len:
            raise ValueError(f"invalid beam parameters: {params}")
        return bp


def beam_decode(step_fn, eos_id: int, params: BeamParams) -> list[tuple[tuple[int, ...], float]]:
    """Best-first search over `step_fn(prefix) -> log-prob sequence`.

    Returns completed (tokens, score) pairs sorted by normalized score
    descending, ties toward the smaller token sequence.
    """
    width = params.num_beams
    lp = params.length_penalty

    def normalized(tokens, score):
        return score / (len(tokens) ** lp)

    live = [((), 0.0)]
    pool: list[tuple[tuple[int, ...], float]] = []
    for depth in range(params.max_len):
        expansions = []
        for tokens, score in live:
            log_probs = step_fn(list(tokens))
            for tok, tok_lp in enumerate(log_probs):
                tok_lp = float(tok_lp)
                if math.isinf(tok_lp):
                    continue
                if tok == eos_id and depth < params.min_len:
                    continue
                expansions.append((tokens + (tok,), score + tok_lp))
        expansions.sort(key=lambda e: (-e[1], e[0]))
        live = []
        for tokens, score in expansions[:width]:
            if tokens[-1] == eos_id or len(tokens) >= params.max_len:
                pool.append((tokens, score))
            else:
                live.append((tokens, score))
        if not live:
            break
        if len(pool) >= width:
            ranked = sorted(pool, key=lambda h: (-normalized(*h), h[0]))
            kth = normalized(*ranked[width - 1])
            best_live = max(score for _, score in live)
            if best_live / (params.max_len ** lp) <= kth:
                break
    pool.sort(key=lambda h: (-normalized(*h), h[0]))
    return pool


def summarize(backend, text: str, method: str, params: dict, n: int) -> list[str]:
    """Reference decoding entrypoint used by /v1/summarize."""
    if n < 1:
        raise ValueError("n must be positive")
    if method == "greedy":
        beam_params = BeamParams.from_mapping({**params, "num_beams": 1})
    elif method == "beam":
        beam_params = BeamParams.from_mapping(params)
    else:
        raise ValueError(f"server-side decoding supports 'beam' and 'greedy', not {method!r}")
    if beam_params.num_beams < n:
        raise ValueError(f"num_beams={beam_params.num_beams} cannot yield n={n} summaries")
    encoded = backend.encode(text)

    def step_fn(prefix):
        log_probs, _ = backend.step(encoded.state, prefix)
        return log_probs

    hyps = beam_decode(step_fn, backend.eos_id, beam_params)
    return [backend.detokenize(tokens) for tokens, _ in hyps[:n]]
