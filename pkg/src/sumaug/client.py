"""HTTP client adapter exposing a remote summarization server as a StepModel.

Wire protocol (JSON over HTTP, UTF-8):

    GET    /v1/health                -> {"status": "ok", "model_id": str, "protocol": 1}
    GET    /v1/vocab                 -> {"size": int, "bos_id": int, "eos_id": int}
    POST   /v1/session   {"text"}    -> {"session_id": str, "truncated": bool, "source_len": int}
    POST   /v1/step      {"session_id", "prefix"} -> {"log_probs": [...], "representation": [...]}
    POST   /v1/summarize {"text", "method", "params", "n"} -> {"summaries": [...]}
    POST   /v1/detokenize {"tokens"} -> {"text": str}
    DELETE /v1/session/{id}          -> {}

/v1/detokenize is an extension over the base protocol: step-driven decoding
yields token ids, and rendering them as text requires the server's tokenizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import httpx
import numpy as np

from .lm import StepOutput

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 120.0


class BackendError(RuntimeError):
    """Transport failure or protocol violation talking to the model server."""


@dataclass(frozen=True)
class ServerInfo:
    model_id: str
    vocab_size: int
    bos_id: int
    eos_id: int


_info_cache: dict[str, ServerInfo] = {}


def _request(client: httpx.Client, method: str, url: str, **kwargs) -> dict:
    try:
        resp = client.request(method, url, **kwargs)
        resp.raise_for_status()
        return resp.json()
    except httpx.HTTPError as exc:
        raise BackendError(f"{method} {url}: {exc}") from exc


def server_info(url: str, client: Optional[httpx.Client] = None) -> ServerInfo:
    """Health-check the server and fetch vocabulary ids, cached per process."""
    if url in _info_cache:
        return _info_cache[url]
    own = client is None
    client = client or httpx.Client(timeout=DEFAULT_TIMEOUT)
    try:
        health = _request(client, "GET", f"{url}/v1/health")
        if health.get("status") != "ok":
            raise BackendError(f"server unhealthy: {health}")
        if health.get("protocol") != PROTOCOL_VERSION:
            raise BackendError(
                f"protocol mismatch: server speaks {health.get('protocol')!r}, "
                f"client expects {PROTOCOL_VERSION}"
            )
        vocab = _request(client, "GET", f"{url}/v1/vocab")
        info = ServerInfo(
            model_id=health["model_id"],
            vocab_size=int(vocab["size"]),
            bos_id=int(vocab["bos_id"]),
            eos_id=int(vocab["eos_id"]),
        )
    finally:
        if own:
            client.close()
    _info_cache[url] = info
    return info


class RemoteStepModel:
    """StepModel bound to one server-side session for a fixed source text."""

    def __init__(self, url: str, context: str, client: Optional[httpx.Client] = None):
        self._url = url
        self._own_client = client is None
        self._client = client or httpx.Client(timeout=DEFAULT_TIMEOUT)
        self._info = server_info(url, self._client)
        session = _request(
            self._client, "POST", f"{url}/v1/session", json={"text": context}
        )
        self._session_id = session["session_id"]
        self.truncated = bool(session["truncated"])
        self.source_len = int(session["source_len"])
        self._context = context

    @property
    def model_id(self) -> str:
        return self._info.model_id

    @property
    def vocab_size(self) -> int:
        return self._info.vocab_size

    @property
    def bos_id(self) -> int:
        return self._info.bos_id

    @property
    def eos_id(self) -> int:
        return self._info.eos_id

    def step(self, context: str, prefix: Sequence[int]) -> StepOutput:
        payload = {"session_id": self._session_id, "prefix": [int(t) for t in prefix]}
        body = _request(self._client, "POST", f"{self._url}/v1/step", json=payload)
        log_probs = np.asarray(body["log_probs"], dtype=np.float64)
        if len(log_probs) != self.vocab_size:
            raise BackendError(
                f"step returned {len(log_probs)} log-probs for vocab of {self.vocab_size}"
            )
        return StepOutput(
            log_probs=log_probs,
            representation=np.asarray(body["representation"], dtype=np.float64),
        )

    def detokenize(self, token_ids: Sequence[int]) -> str:
        body = _request(
            self._client,
            "POST",
            f"{self._url}/v1/detokenize",
            json={"tokens": [int(t) for t in token_ids]},
        )
        return body["text"]

    def close(self) -> None:
        try:
            self._client.delete(f"{self._url}/v1/session/{self._session_id}")
        except httpx.HTTPError:
            pass  # session expires server-side via TTL
        finally:
            if self._own_client:
                self._client.close()

    def __enter__(self) -> "RemoteStepModel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def remote_step_adapter(url: str, context: str, client: Optional[httpx.Client] = None) -> RemoteStepModel:
    """Open a decoding session for `context` on the server at `url`."""
    return RemoteStepModel(url, context, client=client)


def summarize_server_side(
    url: str,
    text: str,
    method: str,
    params: dict,
    n: int,
    client: Optional[httpx.Client] = None,
) -> list[str]:
    """Ask the server for its own reference decoding (cross-check path)."""
    own = client is None
    client = client or httpx.Client(timeout=DEFAULT_TIMEOUT)
    try:
        body = _request(
            client,
            "POST",
            f"{url}/v1/summarize",
            json={"text": text, "method": method, "params": params, "n": n},
        )
        return list(body["summaries"])
    finally:
        if own:
            client.close()
