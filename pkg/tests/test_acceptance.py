"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Offline criteria run on seeded toy models and hand fixtures. The two
dataset-scale criteria are gated on DOCEE_TRAIN_JSONL / DOCEE_TEST_JSONL
pointing at ingested corpus files and are skipped otherwise.
"""

import json
import math
import os
import time
from collections import Counter

import numpy as np
import pytest

from sumaug import decode, evaluation, lm, pipeline, svm, vectorize
from sumaug.cli import main as cli_main
from sumaug.corpus import Document, LabeledCorpus, stratified_folds
from sumaug.vectorize import SparseVector, TfidfConfig
from conftest import FixedModel, random_toy_lm, synthetic_corpus
from oracles import (
    contrastive_replay,
    enumerate_hypotheses,
    primal_objective,
    projected_gradient_svm,
    rank_hypotheses,
)

DOCEE_TRAIN = os.environ.get("DOCEE_TRAIN_JSONL")
DOCEE_TEST = os.environ.get("DOCEE_TEST_JSONL")
MODEL_SERVER_URL = os.environ.get("SUMAUG_MODEL_SERVER_URL")
needs_docee = pytest.mark.skipif(
    not (DOCEE_TRAIN and DOCEE_TEST and os.path.exists(DOCEE_TRAIN) and os.path.exists(DOCEE_TEST)),
    reason="set DOCEE_TRAIN_JSONL and DOCEE_TEST_JSONL to run dataset-scale checks",
)
needs_docee_and_server = pytest.mark.skipif(
    not (DOCEE_TRAIN and os.path.exists(DOCEE_TRAIN or "") and MODEL_SERVER_URL),
    reason="set DOCEE_TRAIN_JSONL and SUMAUG_MODEL_SERVER_URL to run augmentation-effect checks",
)


def test_decoding_oracle_equivalence():
    """Beam search with exhaustive width equals brute-force argmax on 50 models."""
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    checked = 0
    for trial in range(50):
        if trial < 40:
            model = random_toy_lm(rng, n_words=int(rng.integers(3, 6)))
            max_len = int(rng.integers(3, 5))
        else:
            model = random_toy_lm(rng, n_words=10, n_texts=8)
            max_len = 3
        assert model.vocab_size <= 12
        probe = decode.DecodeConfig(method="beam", num_beams=1, max_len=max_len, min_len=0)
        hyps = enumerate_hypotheses(model, "", probe)
        cfg = decode.DecodeConfig(
            method="beam", num_beams=len(hyps), max_len=max_len, min_len=0
        )
        pool = decode.beam_search(model, "", cfg)
        oracle = rank_hypotheses(hyps, cfg.length_penalty)
        assert pool[0].tokens == oracle[0][0], f"trial {trial}"
        assert pool[0].score == pytest.approx(oracle[0][1], abs=1e-9)
        checked += 1
    elapsed = time.perf_counter() - start
    assert checked == 50
    assert elapsed < 5.0, f"oracle equivalence took {elapsed:.2f}s"


def test_reductions_match_greedy():
    """beam(1), top_k(1), top_p(small), contrastive(alpha=0) all equal greedy."""
    rng = np.random.default_rng(77)
    for trial in range(100):
        model = random_toy_lm(rng, n_words=int(rng.integers(2, 8)))
        max_len = int(rng.integers(2, 7))
        common = dict(max_len=max_len, min_len=0)
        g = decode.greedy(model, "", decode.DecodeConfig(method="greedy", **common)).tokens

        beam1 = decode.beam_search(
            model, "", decode.DecodeConfig(method="beam", num_beams=1, **common)
        )[0].tokens
        assert beam1 == g, f"trial {trial}: beam(1)"

        topk1 = decode.top_k_sample(
            model,
            "",
            decode.DecodeConfig(method="top_k", k=1, **common),
            np.random.default_rng(trial),
        ).tokens
        assert topk1 == g, f"trial {trial}: top_k(1)"

        # p strictly below the max step probability along the greedy path
        max_probs = []
        for i in range(len(g)):
            out = lm.step(model, "", g[:i])
            max_probs.append(float(np.exp(out.log_probs).max()))
        p = 0.99 * min(max_probs)
        topp = decode.top_p_sample(
            model,
            "",
            decode.DecodeConfig(method="top_p", p=p, **common),
            np.random.default_rng(trial),
        ).tokens
        assert topp == g, f"trial {trial}: top_p({p})"

        cs = decode.contrastive_search(
            model, "", decode.DecodeConfig(method="contrastive", k=4, alpha=0.0, **common)
        ).tokens
        assert cs == g, f"trial {trial}: contrastive(alpha=0)"


def test_sampling_fidelity():
    """100k single-step draws within L1 < 0.01 of the truncated distributions."""
    n_draws = 100_000

    def empirical(model, cfg, sampler, seed):
        rng = np.random.default_rng(seed)
        counts = Counter()
        for _ in range(n_draws):
            counts[sampler(model, "", cfg, rng).tokens[0]] += 1
        return {t: c / n_draws for t, c in counts.items()}

    # top-k: k=2 over (0.5, 0.3, 0.2) -> (0.625, 0.375, 0)
    model_k = FixedModel([0.5, 0.3, 0.2])
    cfg_k = decode.DecodeConfig(method="top_k", k=2, max_len=1, min_len=0)
    emp = empirical(model_k, cfg_k, decode.top_k_sample, seed=101)
    target = {0: 0.625, 1: 0.375, 2: 0.0}
    l1 = sum(abs(emp.get(t, 0.0) - target[t]) for t in target)
    assert l1 < 0.01, f"top-k L1 = {l1:.4f}"

    # top-p: p=0.95 over (0.5, 0.3, 0.15, 0.05) -> (10/19, 6/19, 3/19, 0)
    model_p = FixedModel([0.5, 0.3, 0.15, 0.05])
    cfg_p = decode.DecodeConfig(method="top_p", p=0.95, max_len=1, min_len=0)
    emp = empirical(model_p, cfg_p, decode.top_p_sample, seed=202)
    target = {0: 10 / 19, 1: 6 / 19, 2: 3 / 19, 3: 0.0}
    l1 = sum(abs(emp.get(t, 0.0) - target[t]) for t in target)
    assert l1 < 0.01, f"top-p L1 = {l1:.4f}"


def test_contrastive_score_audit():
    """Every selected token matches an independent per-step recomputation."""
    rng = np.random.default_rng(404)
    for trial in range(20):
        model = random_toy_lm(rng, n_words=int(rng.integers(3, 9)), n_texts=7)
        cfg = decode.DecodeConfig(
            method="contrastive", k=4, alpha=0.6, max_len=int(rng.integers(4, 9)), min_len=0
        )
        ours = decode.contrastive_search(model, "", cfg).tokens
        replay = contrastive_replay(model, "", cfg)
        assert ours == replay, f"trial {trial}: {ours} != {replay}"


def test_tfidf_hand_fixture():
    """4-document corpus reproduces explicit df/idf/norm arithmetic to 1e-9."""
    corpus = ["the cat sat", "the dog sat", "cats and dogs", "the the the"]
    model = vectorize.fit(corpus, TfidfConfig((1, 1), min_df=1, max_df=1.0))
    vocab = ["and", "cat", "cats", "dog", "dogs", "sat", "the"]
    assert list(model.vocabulary) == vocab
    df = {"and": 1, "cat": 1, "cats": 1, "dog": 1, "dogs": 1, "sat": 2, "the": 3}
    for term, index in model.vocabulary.items():
        expected = math.log((1 + 4) / (1 + df[term])) + 1
        assert abs(model.idf[index] - expected) < 1e-9
    for doc in corpus:
        tf = Counter(doc.split())
        dense = np.array([tf.get(t, 0) * (math.log(5 / (1 + df[t])) + 1) for t in vocab])
        dense = dense / np.linalg.norm(dense)
        vec = vectorize.transform(model, doc)
        got = np.zeros(len(vocab))
        got[vec.indices] = vec.values
        assert np.max(np.abs(got - dense)) < 1e-9

    # min_df boundary: df=2 excluded at min_df=3, kept at min_df=2
    kept = vectorize.fit(corpus, TfidfConfig((1, 1), min_df=2, max_df=1.0))
    assert set(kept.vocabulary) == {"sat", "the"}
    only3 = vectorize.fit(corpus, TfidfConfig((1, 1), min_df=3, max_df=1.0))
    assert set(only3.vocabulary) == {"the"}
    # max_df boundary: df/N = 0.75 kept at exactly 0.75, dropped below it
    at_boundary = vectorize.fit(corpus, TfidfConfig((1, 1), min_df=1, max_df=0.75))
    assert "the" in at_boundary.vocabulary
    below = vectorize.fit(corpus, TfidfConfig((1, 1), min_df=1, max_df=0.5))
    assert "the" not in below.vocabulary
    assert "sat" in below.vocabulary


def sv(dense):
    dense = np.asarray(dense, dtype=np.float64)
    idx = np.flatnonzero(dense)
    return SparseVector(indices=idx, values=dense[idx], dim=len(dense))


def test_svm_solver():
    """Two-point analytic fixture, reference-solver agreement, monotone dual."""
    import warnings

    # (i) two-point max-margin fixture
    X = [sv([1.0, 0.0]), sv([-1.0, 0.0])]
    cfg = svm.TrainConfig(C=1e4, tol=1e-8, max_sweeps=2000, fit_intercept=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", svm.ConvergenceWarning)
        w = svm.train_binary(X, [1.0, -1.0], cfg)
    assert abs(w[0] - 1.0) < 1e-3 and abs(w[1]) < 1e-3

    # (ii) primal objective within 1e-3 of the projected-gradient reference
    rng = np.random.default_rng(909)
    for trial in range(20):
        n, d = 20, 5
        X_dense = rng.standard_normal((n, d)) * (rng.random((n, d)) < 0.6)
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        X_sparse = [sv(row) for row in X_dense]
        cfg = svm.TrainConfig(C=1.0, seed=trial)
        w = svm.train_binary(X_sparse, y, cfg)
        X_aug = np.hstack([X_dense, np.ones((n, 1))])
        w_ref = projected_gradient_svm(X_aug, y, C=1.0, tol=1e-10)
        gap = abs(primal_objective(X_aug, y, w, 1.0) - primal_objective(X_aug, y, w_ref, 1.0))
        assert gap < 1e-3, f"trial {trial}: objective gap {gap:.2e}"

    # (iii) dual objective non-decreasing every sweep
    X_dense = rng.standard_normal((30, 8))
    y = np.where(rng.random(30) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    csr = svm._to_csr([sv(row) for row in X_dense], True, 1.0)
    sol = svm._solve_csr(csr, y, svm.TrainConfig(seed=3), track_objective=True)
    objs = np.array(sol.dual_objectives)
    slack = 1e-12 * np.maximum(1.0, np.abs(objs[:-1]))
    assert np.all(np.diff(objs) >= -slack)


def test_macro_f1_fixtures():
    """Hand examples exact; invariance under 100 random relabelings."""
    assert evaluation.macro_f1(["a", "b", "a"], ["a", "b", "a"]) == 1.0
    assert evaluation.macro_f1(["a", "a", "b", "b"], ["a", "b", "a", "b"]) == pytest.approx(0.5)
    assert evaluation.macro_f1(["a", "a", "a"], ["b", "b", "b"]) == 0.0

    rng = np.random.default_rng(55)
    alphabet = list("abcdefg")
    gold = rng.choice(alphabet, size=60).tolist()
    pred = rng.choice(alphabet, size=60).tolist()
    base = evaluation.macro_f1(gold, pred)
    for _ in range(100):
        perm = rng.permutation(alphabet).tolist()
        mapping = dict(zip(alphabet, perm))
        relabeled = evaluation.macro_f1([mapping[g] for g in gold], [mapping[p] for p in pred])
        assert relabeled == pytest.approx(base, abs=1e-12)


CANARY = "zzcanaryzz"


class EchoModel:
    """Context-copying stand-in summarizer with a corpus-wide vocabulary."""

    def __init__(self, corpus_texts, echo_mass=0.9, d=16, seed=0):
        words = sorted({t for text in corpus_texts for t in text.split()})
        self.tokens = ("<s>", "</s>", *words)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.echo_mass = echo_mass
        rng = np.random.default_rng(seed)
        emb = rng.standard_normal((len(self.tokens), d))
        self._emb = emb / np.linalg.norm(emb, axis=1, keepdims=True)

    @property
    def vocab_size(self):
        return len(self.tokens)

    @property
    def bos_id(self):
        return 0

    @property
    def eos_id(self):
        return 1

    def step(self, context, prefix):
        target = [self.index[t] for t in context.split() if t in self.index]
        pos = len(prefix)
        nxt = target[pos] if pos < len(target) else self.eos_id
        probs = np.full(self.vocab_size, (1.0 - self.echo_mass) / (self.vocab_size - 1))
        probs[nxt] = self.echo_mass
        last = prefix[-1] if prefix else self.bos_id
        return lm.StepOutput(log_probs=np.log(probs), representation=self._emb[last])

    def detokenize(self, token_ids):
        return " ".join(self.tokens[t] for t in token_ids if t > 1)


class EchoBackend:
    def __init__(self, corpus):
        self._model = EchoModel([d.text for d in corpus.documents])
        self.model_id = "echo-test"

    def open(self, context):
        return self._model

    def close(self, model):
        pass


def test_leakage_canary():
    """Summaries of a canary document never train the fold holding it out."""
    docs = list(synthetic_corpus().documents)
    canary_doc = Document(
        id="canary-0",
        title="Fire alert",
        text=f"{CANARY} blaze spread through the depot overnight",
        label="fire",
    )
    docs.append(canary_doc)
    corpus = LabeledCorpus.from_documents(docs)
    cfg = pipeline.ExperimentConfig(
        augmentation="top_p",
        top_p=0.97,
        low_resource_threshold=12,
        max_len=8,
        min_len=2,
        min_df=1,
        seed=3,
    )
    backend = EchoBackend(corpus)
    augmented = pipeline.augment_corpus(corpus, cfg, backend, retry_delays=())
    canary_summaries = [ex.summary for ex in augmented if ex.source_id == "canary-0"]
    assert canary_summaries and any(CANARY in s for s in canary_summaries)

    folds = stratified_folds(corpus, k=5, seed=cfg.seed)
    canary_fold = folds.fold_of["canary-0"]
    augmenter = pipeline.build_augmenter(augmented, corpus)
    seen_training_texts: dict[int, list[str]] = {}

    def spying_trainer(train_docs):
        fold = next(
            f for f in range(folds.k)
            if not any(folds.fold_of.get(d.id) == f for d in train_docs)
        )
        seen_training_texts[fold] = [d.text for d in train_docs]
        return lambda heldout: [d.label for d in heldout]  # scoring is irrelevant here

    evaluation.cross_validate(corpus, folds, spying_trainer, augmenter)
    assert set(seen_training_texts) == set(range(5))
    for text in seen_training_texts[canary_fold]:
        assert CANARY not in text
    leaky_elsewhere = [
        f for f in range(5) if f != canary_fold
        and any(CANARY in t for t in seen_training_texts[f])
    ]
    assert leaky_elsewhere, "canary summaries should train the other folds"


def test_end_to_end_smoke(tmp_path):
    """ingest -> summarize -> eval -> compare on the toy backend in < 60 s."""
    start = time.perf_counter()
    corpus = synthetic_corpus()
    native = tmp_path / "native.json"
    native.write_text(
        json.dumps(
            [
                {"headline": d.title, "body": d.text, "event_type": d.label}
                for d in corpus.documents
            ]
        )
    )
    corpus_path = tmp_path / "train.jsonl"
    assert cli_main(
        [
            "ingest",
            "--input", str(native),
            "--output", str(corpus_path),
            "--title-key", "headline",
            "--text-key", "body",
            "--label-key", "event_type",
        ]
    ) == 0

    aug_path = tmp_path / "augmented.jsonl"
    common_flags = [
        "--train-corpus", str(corpus_path),
        "--low-resource-threshold", "12",
        "--min-df", "1",
        "--max-len", "10",
        "--min-len", "2",
        "--folds", "5",
    ]
    assert cli_main(
        [
            "summarize",
            *common_flags,
            "--augmentation", "contrastive",
            "--output", str(aug_path),
        ]
    ) == 0
    records = [json.loads(l) for l in aug_path.read_text().splitlines()]
    n_low = sum(1 for d in corpus.documents if d.label in ("strike", "vote", "fire"))
    assert n_low == 24
    drops = 3 * n_low - len(records)
    assert 0 <= drops < 3 * n_low
    per_doc = Counter(r["source_id"] for r in records)
    for doc_id, count in per_doc.items():
        assert 1 <= count <= 3

    run_base = tmp_path / "run-base"
    run_aug = tmp_path / "run-aug"
    assert cli_main(
        [
            "eval",
            *common_flags,
            "--augmentation", "none",
            "--label", "noAUG",
            "--out-dir", str(run_base),
        ]
    ) == 0
    assert cli_main(
        [
            "eval",
            *common_flags,
            "--augmentation", "contrastive",
            "--augmented", str(aug_path),
            "--label", "AUG-C",
            "--out-dir", str(run_aug),
        ]
    ) == 0
    manifest = json.loads((run_aug / "manifest.json").read_text())
    assert manifest["augmented_count"] == len(records)
    assert manifest["distinctness_drops"] == drops

    merged = tmp_path / "table.tsv"
    assert cli_main(
        [
            "compare",
            str(run_base / "manifest.json"),
            str(run_aug / "manifest.json"),
            "--output", str(merged),
        ]
    ) == 0
    table = merged.read_text().splitlines()
    assert table[0].startswith("setup\tmean\tstd")
    assert len(table) == 3
    labels = [line.split("\t")[0] for line in table[1:]]
    assert labels == ["noAUG", "AUG-C"]
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"smoke run took {elapsed:.1f}s"


@needs_docee
def test_docee_dataset_statistics(capsys):
    """Corpus statistics of the ingested DocEE splits match the known dataset figures."""
    assert cli_main(["stats", "--corpus", DOCEE_TRAIN, "--threshold", "500", "--json"]) == 0
    train_stats = json.loads(capsys.readouterr().out)
    assert train_stats["documents"] == 21949
    assert train_stats["classes"] == 59
    assert train_stats["max_class_count"] == 1760
    assert train_stats["classes_above_threshold"] == 12
    assert train_stats["low_resource_classes"] == 59 - 12
    assert train_stats["low_resource_documents"] == 11285

    assert cli_main(["stats", "--corpus", DOCEE_TEST, "--json"]) == 0
    test_stats = json.loads(capsys.readouterr().out)
    assert test_stats["documents"] == 5526


@needs_docee
def test_docee_title_ablation(tmp_path):
    """T+D beats D by about 2 points of macro-F1 on 5-fold CV."""
    start = time.perf_counter()
    results = {}
    for mode, sub in (("T+D", "td"), ("D", "d")):
        cfg = pipeline.ExperimentConfig(
            train_corpus=DOCEE_TRAIN,
            title_mode=mode,
            augmentation="none",
            folds=5,
            seed=0,
            out_dir=str(tmp_path / sub),
        )
        report, _ = pipeline.run_experiment(cfg)
        results[mode] = 100.0 * report.mean
    delta = results["T+D"] - results["D"]
    assert abs(delta - 2.04) <= 1.0, f"delta {delta:.2f}"
    assert abs(results["T+D"] - 82.61) <= 1.5, f"T+D {results['T+D']:.2f}"
    assert abs(results["D"] - 80.57) <= 1.5, f"D {results['D']:.2f}"
    assert time.perf_counter() - start < 900.0


AUG_TARGETS = {
    "beam3": 83.20,
    "beam5": 83.13,
    "beam10": 83.15,
    "top_k": 83.21,
    "top_p": 83.08,
    "contrastive": 83.26,
}


@needs_docee_and_server
def test_docee_augmentation_effect(tmp_path):
    """All six augmentation setups land near their reported means; AUG-C > noAUG."""
    cache = tmp_path / "summary-cache"
    means = {}
    for tag in ("none", *AUG_TARGETS):
        cfg = pipeline.ExperimentConfig(
            train_corpus=DOCEE_TRAIN,
            augmentation=tag,
            backend=MODEL_SERVER_URL,
            cache_dir=str(cache),
            folds=5,
            seed=0,
            out_dir=str(tmp_path / tag),
            label=tag,
        )
        report, _ = pipeline.run_experiment(cfg)
        means[tag] = 100.0 * report.mean
    assert abs(means["contrastive"] - 83.26) <= 1.0
    assert means["contrastive"] - means["none"] > 0
    for tag, target in AUG_TARGETS.items():
        assert abs(means[tag] - target) <= 1.0, f"{tag}: {means[tag]:.2f} vs {target}"
    aug_means = [means[tag] for tag in AUG_TARGETS]
    assert max(aug_means) - min(aug_means) <= 0.5
