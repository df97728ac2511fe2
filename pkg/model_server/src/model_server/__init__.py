"""HTTP model server exposing per-step summarizer outputs.

Wraps a pretrained encoder-decoder summarization model (or a deterministic
toy stand-in) behind a small JSON protocol: clients open a session for a
source text and query next-token log-probabilities plus the decoder's hidden
representation one step at a time, driving their own decoding strategies.
"""

__version__ = "0.1.0"
