import json

import pytest
from fastapi.testclient import TestClient

from model_server.app import create_app
from model_server.backends import ToySummarizer

TEXTS = [
    "storm hits the northern coast",
    "the coast braces for another storm",
    "flood waters reach the old town",
    "town officials report flood damage",
    "voters reach the polls early",
    "early results from the polls arrive",
]


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for i, text in enumerate(TEXTS):
            fh.write(json.dumps({"id": f"t{i}", "text": text}) + "\n")
    return path


@pytest.fixture(scope="session")
def backend(corpus_path):
    return ToySummarizer(corpus_path, max_source_len=16, seed=0)


@pytest.fixture
def api(backend):
    app = create_app(backend)
    with TestClient(app) as client:
        yield client
