import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sumaug import lm


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        name = report.nodeid.split("::")[-1]
        sys.stderr.write(f"[{status}] {name}\n")


class FixedModel:
    """Step model emitting one fixed distribution at every position."""

    def __init__(self, probs, eos_id=None, d=4, seed=0):
        probs = np.asarray(probs, dtype=np.float64)
        self.log_probs = np.log(probs)
        self._size = len(probs)
        self._eos = self._size - 1 if eos_id is None else eos_id
        rng = np.random.default_rng(seed)
        emb = rng.standard_normal((self._size, d))
        self._emb = emb / np.linalg.norm(emb, axis=1, keepdims=True)

    @property
    def vocab_size(self):
        return self._size

    @property
    def bos_id(self):
        return -1  # never emitted; FixedModel has no start symbol

    @property
    def eos_id(self):
        return self._eos

    def step(self, context, prefix):
        last = 0 if not prefix else prefix[-1]
        return lm.StepOutput(log_probs=self.log_probs, representation=self._emb[last])


WORDS = [
    "flood", "storm", "quake", "talks", "vote", "strike", "fire", "rescue",
    "market", "virus",
]


def random_toy_lm(rng, n_words, n_texts=6, text_len=(2, 7), d=8):
    """Seeded ToyLm over a small vocabulary of event-flavored words."""
    words = WORDS[:n_words]
    texts = [
        " ".join(rng.choice(words, size=rng.integers(*text_len)))
        for _ in range(n_texts)
    ]
    return lm.build_toy_lm(texts, d=d, seed=int(rng.integers(2**31)))


@pytest.fixture
def toy_model():
    return random_toy_lm(np.random.default_rng(7), n_words=4)


CLASS_WORDS = {
    "flood": ["river", "levee", "overflow", "rainfall"],
    "storm": ["wind", "gust", "hurricane", "landfall"],
    "quake": ["tremor", "epicenter", "magnitude", "aftershock"],
    "strike": ["union", "picket", "walkout", "wages"],
    "vote": ["ballot", "turnout", "election", "recount"],
    "fire": ["blaze", "smoke", "evacuation", "firefighters"],
}

FILLER = ["the", "said", "officials", "today", "city", "people", "reported"]


def synthetic_corpus(sizes=None, seed=0):
    """Imbalanced 6-class corpus with class-specific vocabularies.

    Default sizes put three classes below a low-resource threshold of 12.
    """
    from sumaug.corpus import Document, LabeledCorpus

    sizes = sizes or {"flood": 30, "storm": 30, "quake": 30, "strike": 8, "vote": 8, "fire": 8}
    rng = np.random.default_rng(seed)
    docs = []
    for label, n in sizes.items():
        words = CLASS_WORDS[label]
        for i in range(n):
            body = " ".join(
                rng.choice(words + FILLER, size=12, p=None).tolist()
                + [words[i % len(words)]] * 2
            )
            title = f"{label.capitalize()} update {i}" if i % 3 else f"{label.capitalize()} alert!"
            docs.append(Document(id=f"{label}-{i}", title=title, text=body, label=label))
    return LabeledCorpus.from_documents(docs)
