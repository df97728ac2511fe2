"""Command-line interface.

Subcommands: ingest (native dataset -> JSONL), stats, folds, summarize,
train, eval (cross-validated experiment), compare (multi-run report).
Exit codes: 0 success, 1 validation error, 2 backend failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from . import pipeline, svm, vectorize
from .client import BackendError
from .corpus import (
    CorpusError,
    Document,
    LabeledCorpus,
    class_stats,
    load_corpus,
    low_resource_labels,
    save_corpus,
    stratified_folds,
)
from .evaluation import EvaluationError


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(pipeline.ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "int":
            parser.add_argument(flag, type=int, default=None)
        elif f.type == "float":
            parser.add_argument(flag, type=float, default=None)
        else:
            parser.add_argument(flag, default=None)
    parser.add_argument("--config", default=None, help="flat key=value config file")


def _config_from_args(args: argparse.Namespace) -> pipeline.ExperimentConfig:
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(pipeline.ExperimentConfig)
        if getattr(args, f.name, None) is not None
    }
    if args.config:
        return pipeline.config_from_file(args.config, overrides)
    return pipeline.config_from_mapping(overrides)


def _read_native_records(path: Path, fmt: str) -> list[dict]:
    if fmt == "auto":
        fmt = {".json": "json", ".jsonl": "jsonl", ".csv": "csv"}.get(path.suffix.lower(), "json")
    if fmt == "json":
        data = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise CorpusError(f"{path}: expected a top-level JSON array")
        return data
    if fmt == "jsonl":
        return [
            json.loads(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    raise CorpusError(f"unsupported input format {fmt!r}")


def cmd_ingest(args) -> int:
    path = Path(args.input)
    records = _read_native_records(path, args.format)
    docs = []
    for i, record in enumerate(records):
        if args.id_key and args.id_key in record:
            doc_id = str(record[args.id_key])
        else:
            doc_id = f"{args.id_prefix}{i:06d}"
        try:
            docs.append(
                Document(
                    id=doc_id,
                    title=str(record.get(args.title_key, "") or ""),
                    text=str(record[args.text_key]),
                    label=str(record[args.label_key]),
                )
            )
        except KeyError as exc:
            raise CorpusError(f"{path}: record {i} lacks key {exc}") from exc
    corpus = LabeledCorpus.from_documents(docs)
    save_corpus(corpus, args.output)
    print(f"wrote {len(corpus)} documents, {len(corpus.label_set)} labels -> {args.output}")
    return 0


def cmd_stats(args) -> int:
    corpus = load_corpus(args.corpus)
    stats = class_stats(corpus, args.threshold)
    low = low_resource_labels(stats)
    n_low_docs = sum(n for c, n in stats.counts.items() if c in low)
    payload = {
        "documents": len(corpus),
        "classes": len(corpus.label_set),
        "max_class_count": max(stats.counts.values()),
        "threshold": args.threshold,
        "classes_above_threshold": sum(
            1 for n in stats.counts.values() if n > args.threshold
        ),
        "low_resource_classes": len(low),
        "low_resource_documents": n_low_docs,
    }
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for key, value in payload.items():
            print(f"{key}: {value}")
        if args.per_class:
            for label in corpus.label_set:
                marker = " (low-resource)" if label in low else ""
                print(f"  {label}: {stats.counts[label]}{marker}")
    return 0


def cmd_folds(args) -> int:
    corpus = load_corpus(args.corpus)
    assignment = stratified_folds(corpus, args.k, args.seed)
    payload = {"k": assignment.k, "seed": args.seed, "fold_of": assignment.fold_of}
    Path(args.output).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    print(f"wrote fold assignment for {len(assignment.fold_of)} documents -> {args.output}")
    return 0


def cmd_summarize(args) -> int:
    cfg = _config_from_args(args)
    if cfg.augmentation == "none":
        raise pipeline.PipelineError("summarize requires an augmentation method")
    corpus = load_corpus(cfg.train_corpus)
    backend = pipeline.make_backend(cfg, corpus)
    cache = pipeline.SummaryCache(cfg.cache_dir) if cfg.cache_dir else None
    out_path = Path(args.output)
    written = 0
    with open(out_path, "w", encoding="utf-8") as fh:

        def on_result(batch):
            nonlocal written
            for ex in batch:
                fh.write(json.dumps(ex.to_record(), ensure_ascii=False) + "\n")
            fh.flush()
            written += len(batch)

        pipeline.augment_corpus(corpus, cfg, backend, cache=cache, on_result=on_result)
    print(f"wrote {written} augmented examples -> {out_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    corpus = load_corpus(cfg.train_corpus)
    docs = list(corpus.documents)
    if args.augmented:
        augmented = pipeline.load_augmented(args.augmented)
        augmenter = pipeline.build_augmenter(augmented, corpus)
        docs.extend(doc for doc, _ in augmenter(docs))
    texts = [pipeline.classifier_input(d, cfg.title_mode) for d in docs]
    tfidf = vectorize.fit(
        texts,
        vectorize.TfidfConfig(
            ngram_range=(cfg.ngram_lo, cfg.ngram_hi), min_df=cfg.min_df, max_df=cfg.max_df
        ),
    )
    X = vectorize.transform_many(tfidf, texts)
    model = svm.train_ovr(
        X,
        [d.label for d in docs],
        svm.TrainConfig(C=cfg.svm_c, tol=cfg.svm_tol, max_sweeps=cfg.svm_max_sweeps, seed=cfg.seed),
    )
    out_dir = Path(args.model_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vectorize.save_tfidf(tfidf, out_dir / "tfidf.json")
    svm.save_model(model, out_dir / "svm.npz")
    print(
        f"trained on {len(docs)} examples "
        f"({len(model.class_names)} classes, {tfidf.dim} features) -> {out_dir}"
    )
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    report, paths = pipeline.run_experiment(cfg, augmented_path=args.augmented)
    print(Path(paths["report_txt"]).read_text(encoding="utf-8"), end="")
    print(f"artifacts in {Path(paths['manifest']).parent}")
    return 0


def cmd_compare(args) -> int:
    text, tsv = pipeline.compare_runs(args.manifests)
    print(text, end="")
    if args.output:
        Path(args.output).write_text(tsv, encoding="utf-8")
        print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sumaug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a native dataset file to corpus JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=("auto", "json", "jsonl", "csv"), default="auto")
    p.add_argument("--id-key", default="id")
    p.add_argument("--title-key", default="title")
    p.add_argument("--text-key", default="text")
    p.add_argument("--label-key", default="label")
    p.add_argument("--id-prefix", default="doc-")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="class statistics of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--threshold", type=int, default=500)
    p.add_argument("--json", action="store_true")
    p.add_argument("--per-class", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("folds", help="write a stratified fold assignment")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("summarize", help="generate augmented examples for low-resource classes")
    _add_config_flags(p)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("train", help="fit TF-IDF + SVM on a corpus and save the models")
    _add_config_flags(p)
    p.add_argument("--augmented", default=None, help="augmented-example JSONL to add")
    p.add_argument("--model-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run a cross-validated experiment")
    _add_config_flags(p)
    p.add_argument("--augmented", default=None, help="use precomputed augmented JSONL")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="merge run manifests into one table")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--output", default=None, help="also write the merged TSV here")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except (
        CorpusError,
        EvaluationError,
        pipeline.PipelineError,
        vectorize.VectorizeError,
        svm.SvmError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
