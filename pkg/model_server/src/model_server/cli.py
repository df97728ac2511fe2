"""Serve a summarization model over the step protocol.

Examples:
    model-server --model facebook/bart-large-cnn --port 8750
    model-server --model toy:corpus.jsonl --port 8750 --max-source-len 64
"""

from __future__ import annotations

import argparse

import uvicorn

from .app import DEFAULT_SESSION_TTL, create_app
from .backends import load_backend


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="model-server", description=__doc__)
    parser.add_argument(
        "--model",
        required=True,
        help="HuggingFace model id/path, or toy:<corpus file> for the bigram stand-in",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    parser.add_argument("--max-source-len", type=int, default=1024)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--seed", type=int, default=0, help="toy backend embedding seed")
    parser.add_argument("--session-ttl", type=float, default=DEFAULT_SESSION_TTL)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    backend = load_backend(
        args.model, max_source_len=args.max_source_len, device=args.device, seed=args.seed
    )
    app = create_app(backend, session_ttl=args.session_ttl)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
