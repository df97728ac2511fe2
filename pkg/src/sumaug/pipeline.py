"""Experiment orchestration: augmentation, cross-validated runs, reports.

Ties the pieces together: low-resource documents are summarized with a
configured decoding method (in-process toy model or remote model server),
summaries become extra training examples carrying the source label, and the
TF-IDF + linear SVM classifier is evaluated with stratified cross-validation.
Augmentation is applied to training folds only.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import svm, vectorize
from .client import BackendError, RemoteStepModel, server_info
from .corpus import (
    Document,
    LabeledCorpus,
    class_stats,
    compose_title_text,
    load_corpus,
    low_resource_labels,
    stratified_folds,
)
from .decode import DecodeConfig, generate_n_distinct
from .evaluation import cross_validate
from .lm import ToyLm, build_toy_lm

log = logging.getLogger(__name__)

AUGMENTATION_TAGS = ("none", "beam3", "beam5", "beam10", "top_k", "top_p", "contrastive")
TITLE_MODES = ("D", "T+D")

AUGMENTED_KEYS = ("source_id", "method", "variant", "summary", "label")


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration; every key maps 1:1 to a CLI flag."""

    train_corpus: str = ""
    title_mode: str = "T+D"
    augmentation: str = "none"
    summaries_per_doc: int = 3
    low_resource_threshold: int = 500
    folds: int = 5
    seed: int = 0
    backend: str = "toy"  # "toy" or an http(s) URL of a model server
    label: str = ""
    # decoding
    top_k: int = 640
    top_p: float = 0.95
    contrastive_k: int = 4
    alpha: float = 0.6
    max_len: int = 142
    min_len: int = 5
    length_penalty: float = 1.0
    # featurization
    ngram_lo: int = 1
    ngram_hi: int = 3
    min_df: int = 3
    max_df: float = 0.9
    # classifier
    svm_c: float = 1.0
    svm_tol: float = 1e-4
    svm_max_sweeps: int = 1000
    # plumbing
    cache_dir: str = ""
    out_dir: str = "runs"
    workers: int = 1

    def __post_init__(self):
        if self.title_mode not in TITLE_MODES:
            raise PipelineError(f"title_mode must be one of {TITLE_MODES}")
        if self.augmentation not in AUGMENTATION_TAGS:
            raise PipelineError(f"augmentation must be one of {AUGMENTATION_TAGS}")
        if self.summaries_per_doc < 1:
            raise PipelineError("summaries_per_doc must be positive")
        if self.folds < 2:
            raise PipelineError("folds must be >= 2")
        if self.workers < 1:
            raise PipelineError("workers must be >= 1")

    @property
    def run_label(self) -> str:
        return self.label or f"{self.title_mode}/{self.augmentation}"


def config_from_file(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse a flat key=value config file, applying overrides on top."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise PipelineError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    values.update(overrides or {})
    return config_from_mapping(values)


def config_from_mapping(values: dict) -> ExperimentConfig:
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    parsed = {}
    for key, value in values.items():
        if key not in fields:
            raise PipelineError(f"unknown config key {key!r}")
        if value is None:
            continue
        ftype = fields[key].type
        if isinstance(value, str):
            if ftype == "int":
                value = int(value)
            elif ftype == "float":
                value = float(value)
        parsed[key] = value
    return ExperimentConfig(**parsed)


def write_config(cfg: ExperimentConfig, path) -> None:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in dataclasses.fields(cfg)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def decode_config_for(cfg: ExperimentConfig) -> DecodeConfig:
    common = dict(
        max_len=cfg.max_len,
        min_len=cfg.min_len,
        length_penalty=cfg.length_penalty,
        seed=cfg.seed,
    )
    tag = cfg.augmentation
    if tag.startswith("beam"):
        return DecodeConfig(method="beam", num_beams=int(tag.removeprefix("beam")), **common)
    if tag == "top_k":
        return DecodeConfig(method="top_k", k=cfg.top_k, **common)
    if tag == "top_p":
        return DecodeConfig(method="top_p", p=cfg.top_p, **common)
    if tag == "contrastive":
        return DecodeConfig(method="contrastive", k=cfg.contrastive_k, alpha=cfg.alpha, **common)
    raise PipelineError(f"augmentation tag {tag!r} has no decoding method")


@dataclass(frozen=True)
class AugmentedExample:
    source_id: str
    method: str
    variant: int
    summary: str
    label: str

    def to_record(self) -> dict:
        return {
            "source_id": self.source_id,
            "method": self.method,
            "variant": self.variant,
            "summary": self.summary,
            "label": self.label,
        }


def save_augmented(examples: Sequence[AugmentedExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_record(), ensure_ascii=False) + "\n")


def load_augmented(path) -> list[AugmentedExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            missing = [k for k in AUGMENTED_KEYS if k not in record]
            if missing:
                raise PipelineError(f"{path}:{lineno}: missing keys {missing}")
            out.append(
                AugmentedExample(
                    source_id=record["source_id"],
                    method=record["method"],
                    variant=int(record["variant"]),
                    summary=record["summary"],
                    label=record["label"],
                )
            )
    return out


class ToyBackend:
    """In-process backend: one bigram toy model fitted on the corpus texts."""

    def __init__(self, corpus: LabeledCorpus, seed: int = 0, d: int = 16):
        texts = [doc.text for doc in corpus.documents]
        self._model = build_toy_lm(texts, d=d, seed=seed)
        digest = hashlib.sha256("\x00".join(texts).encode("utf-8")).hexdigest()[:12]
        self.model_id = f"toy-{digest}-d{d}-s{seed}"

    def open(self, context: str) -> ToyLm:
        return self._model

    def close(self, model) -> None:
        pass


class RemoteBackend:
    """Backend opening one server session per document."""

    def __init__(self, url: str):
        self.url = url.rstrip("/")
        self.model_id = server_info(self.url).model_id

    def open(self, context: str) -> RemoteStepModel:
        return RemoteStepModel(self.url, context)

    def close(self, model: RemoteStepModel) -> None:
        model.close()


def make_backend(cfg: ExperimentConfig, corpus: LabeledCorpus):
    if cfg.backend == "toy":
        return ToyBackend(corpus, seed=cfg.seed)
    if cfg.backend.startswith(("http://", "https://")):
        return RemoteBackend(cfg.backend)
    raise PipelineError(f"backend must be 'toy' or an http(s) URL, got {cfg.backend!r}")


class SummaryCache:
    """Disk cache keyed by document, method, decode params, backend, and input text."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: dict) -> Path:
        digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode("utf-8")).hexdigest()
        return self.dir / f"{digest}.json"

    def get(self, key: dict) -> Optional[list[str]]:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["summaries"]

    def put(self, key: dict, summaries: list[str]) -> None:
        payload = {"key": key, "summaries": summaries}
        self._path(key).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8"
        )


def classifier_input(doc: Document, title_mode: str) -> str:
    return compose_title_text(doc.title, doc.text) if title_mode == "T+D" else doc.text


def _cache_key(cfg: ExperimentConfig, decode_cfg: DecodeConfig, doc_id: str, source_text: str, model_id: str) -> dict:
    return {
        "document_id": doc_id,
        "method": cfg.augmentation,
        "decode": dataclasses.asdict(decode_cfg),
        "n": cfg.summaries_per_doc,
        "backend_model": model_id,
        "input_sha256": hashlib.sha256(source_text.encode("utf-8")).hexdigest(),
    }


def _dedupe_texts(texts: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for t in texts:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def _summarize_document(backend, doc: Document, source_text: str, decode_cfg: DecodeConfig, n: int) -> list[str]:
    model = backend.open(source_text)
    try:
        seqs = generate_n_distinct(model, source_text, decode_cfg, n, stream_key=doc.id)
        return _dedupe_texts([model.detokenize(seq) for seq in seqs])
    finally:
        backend.close(model)


def augment_corpus(
    corpus: LabeledCorpus,
    cfg: ExperimentConfig,
    backend,
    cache: Optional[SummaryCache] = None,
    on_result: Optional[Callable[[list[AugmentedExample]], None]] = None,
    retry_delays: Sequence[float] = (0.5, 1.0),
) -> list[AugmentedExample]:
    """Summarize every low-resource document; labels are inherited.

    Backend failures are retried with bounded backoff; documents still
    failing are reported together at the end, after partial results have
    been handed to `on_result` (and the cache).
    """
    if cfg.augmentation == "none":
        return []
    stats = class_stats(corpus, cfg.low_resource_threshold)
    low = low_resource_labels(stats)
    decode_cfg = decode_config_for(cfg)
    todo = [doc for doc in corpus.documents if doc.label in low]

    def run_one(doc: Document):
        source_text = classifier_input(doc, cfg.title_mode)
        key = _cache_key(cfg, decode_cfg, doc.id, source_text, backend.model_id)
        if cache is not None:
            hit = cache.get(key)
            if hit is not None:
                return doc, hit, None
        last_error = None
        for attempt, delay in enumerate((*retry_delays, None)):
            try:
                summaries = _summarize_document(
                    backend, doc, source_text, decode_cfg, cfg.summaries_per_doc
                )
                if cache is not None:
                    cache.put(key, summaries)
                return doc, summaries, None
            except BackendError as exc:
                last_error = exc
                log.warning("document %s: backend attempt %d failed: %s", doc.id, attempt + 1, exc)
                if delay is not None:
                    time.sleep(delay)
        return doc, None, last_error

    results = []
    failed: list[str] = []
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(run_one, todo))
    else:
        outcomes = [run_one(doc) for doc in todo]
    for doc, summaries, error in outcomes:
        if error is not None:
            failed.append(doc.id)
            continue
        if len(summaries) < cfg.summaries_per_doc:
            log.warning(
                "document %s: %d distinct summaries (requested %d)",
                doc.id,
                len(summaries),
                cfg.summaries_per_doc,
            )
        batch = [
            AugmentedExample(
                source_id=doc.id,
                method=cfg.augmentation,
                variant=variant,
                summary=summary,
                label=doc.label,
            )
            for variant, summary in enumerate(summaries)
        ]
        results.extend(batch)
        if on_result is not None:
            on_result(batch)
    if failed:
        raise BackendError(
            f"augmentation failed for {len(failed)} documents after retries: {failed}"
        )
    return results


@dataclass(frozen=True)
class RunSummary:
    label: str
    mean: float
    std: float
    per_fold: tuple[float, ...]


def render_text_table(rows: Sequence[RunSummary]) -> str:
    """Aligned report: one row per setup, macro-F1 as mean +/- std (percent)."""
    label_width = max([len("setup"), *(len(r.label) for r in rows)])
    lines = [f"{'setup'.ljust(label_width)}  macro-F1"]
    for r in rows:
        lines.append(f"{r.label.ljust(label_width)}  {100 * r.mean:.2f} ± {100 * r.std:.2f}")
    return "\n".join(lines) + "\n"


def render_tsv(rows: Sequence[RunSummary]) -> str:
    if not rows:
        return "setup\tmean\tstd\n"
    k = len(rows[0].per_fold)
    header = ["setup", "mean", "std", *[f"fold_{i}" for i in range(k)]]
    lines = ["\t".join(header)]
    for r in rows:
        cells = [r.label, f"{r.mean:.6f}", f"{r.std:.6f}", *[f"{v:.6f}" for v in r.per_fold]]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_trainer(cfg: ExperimentConfig):
    """Per-fold closure: fit TF-IDF and OVR SVM on the (augmented) train split."""
    tfidf_cfg = vectorize.TfidfConfig(
        ngram_range=(cfg.ngram_lo, cfg.ngram_hi), min_df=cfg.min_df, max_df=cfg.max_df
    )
    train_cfg = svm.TrainConfig(
        C=cfg.svm_c, tol=cfg.svm_tol, max_sweeps=cfg.svm_max_sweeps, seed=cfg.seed
    )

    def trainer(train_docs: Sequence[Document]):
        texts = [classifier_input(d, cfg.title_mode) for d in train_docs]
        tfidf = vectorize.fit(texts, tfidf_cfg)
        X = vectorize.transform_many(tfidf, texts)
        model = svm.train_ovr(X, [d.label for d in train_docs], train_cfg)

        def predictor(docs: Sequence[Document]) -> list[str]:
            return [
                svm.predict(model, vectorize.transform(tfidf, classifier_input(d, cfg.title_mode)))
                for d in docs
            ]

        return predictor

    return trainer


def build_augmenter(augmented: Sequence[AugmentedExample], corpus: LabeledCorpus):
    """Closure selecting the augmented examples whose source is in the train split.

    Augmented documents keep the source title so that title composition at
    classification time works the same way as for originals.
    """
    by_source: dict[str, list[AugmentedExample]] = {}
    for ex in augmented:
        by_source.setdefault(ex.source_id, []).append(ex)
    titles = {doc.id: doc.title for doc in corpus.documents}

    def augmenter(train_docs: Sequence[Document]):
        out = []
        for doc in train_docs:
            for ex in by_source.get(doc.id, ()):
                aug_doc = Document(
                    id=f"aug::{ex.source_id}::{ex.method}::{ex.variant}",
                    title=titles.get(ex.source_id, ""),
                    text=ex.summary,
                    label=ex.label,
                )
                out.append((aug_doc, ex.source_id))
        return out

    return augmenter


def run_experiment(cfg: ExperimentConfig, augmented_path: Optional[str] = None):
    """Execute one cross-validated run; returns (FoldReport, artifact paths)."""
    if not cfg.train_corpus:
        raise PipelineError("train_corpus is required")
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    corpus = load_corpus(cfg.train_corpus)
    folds = stratified_folds(corpus, cfg.folds, cfg.seed)
    timings["load_s"] = time.perf_counter() - t0

    augmented: list[AugmentedExample] = []
    if cfg.augmentation != "none":
        t0 = time.perf_counter()
        if augmented_path is not None:
            augmented = load_augmented(augmented_path)
        else:
            backend = make_backend(cfg, corpus)
            cache = SummaryCache(cfg.cache_dir) if cfg.cache_dir else None
            augmented = augment_corpus(corpus, cfg, backend, cache=cache)
        timings["augment_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    augmenter = build_augmenter(augmented, corpus) if augmented else None
    report = cross_validate(corpus, folds, build_trainer(cfg), augmenter)
    timings["train_eval_s"] = time.perf_counter() - t0

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    row = RunSummary(cfg.run_label, report.mean, report.std, report.per_fold_f1)
    (out_dir / "report.tsv").write_text(render_tsv([row]), encoding="utf-8")
    (out_dir / "report.txt").write_text(render_text_table([row]), encoding="utf-8")
    write_config(cfg, out_dir / "config.resolved")
    if augmented:
        save_augmented(augmented, out_dir / "augmented.jsonl")
    stats = class_stats(corpus, cfg.low_resource_threshold)
    n_low_docs = sum(
        n for c, n in stats.counts.items() if c in low_resource_labels(stats)
    )
    manifest = {
        "label": cfg.run_label,
        "config": dataclasses.asdict(cfg),
        "inputs": {"train_corpus_sha256": _sha256_file(cfg.train_corpus)},
        "report": {
            "per_fold_f1": list(report.per_fold_f1),
            "mean": report.mean,
            "std": report.std,
        },
        "augmented_count": len(augmented),
        "low_resource_documents": n_low_docs,
        "distinctness_drops": (
            cfg.summaries_per_doc * n_low_docs - len(augmented) if augmented else 0
        ),
        "timings": timings,
        "svm_kernel": svm.kernel_backend(),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    paths = {
        "report_tsv": str(out_dir / "report.tsv"),
        "report_txt": str(out_dir / "report.txt"),
        "manifest": str(out_dir / "manifest.json"),
        "config": str(out_dir / "config.resolved"),
    }
    return report, paths


def compare_runs(manifest_paths: Sequence[str]) -> tuple[str, str]:
    """Merge run manifests into a multi-row table (text and TSV forms)."""
    rows = []
    for path in manifest_paths:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
        rows.append(
            RunSummary(
                label=manifest["label"],
                mean=manifest["report"]["mean"],
                std=manifest["report"]["std"],
                per_fold=tuple(manifest["report"]["per_fold_f1"]),
            )
        )
    return render_text_table(rows), render_tsv(rows)
