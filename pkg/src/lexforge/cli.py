"""Command-line pipeline: ingest, clean, segment, generate, assemble,
stats, split, export, eval, emit-train-config."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from .cleanse import RULE_NAMES, clean_text
from .config import PipelineConfig, emit_training_config, load_pipeline_config
from .corpus import LawDocument, infer_metadata, load_corpus
from .dataset import (
    assemble_record,
    compute_stats,
    dedup_records,
    emit_plot_data,
    export_jsonl,
    import_jsonl,
    split_dataset,
    tokenizer_file_counter,
    whitespace_token_count,
)
from .errors import ArtifactError, ConfigError, LexforgeError
from .evalkit import read_eval_cases, run_eval, write_eval_report
from .segment import Article, read_law_json, segment_articles, write_law_json
from .synth import ChatClient, PromptSpec, QAPair, build_prompt, parse_llm_output, validate_qa

logger = logging.getLogger(__name__)


# -- artifact layout ----------------------------------------------------------


def _paths(output_dir: Path) -> dict[str, Path]:
    return {
        "documents": output_dir / "corpus" / "documents.jsonl",
        "cleaned": output_dir / "corpus" / "cleaned.jsonl",
        "clean_report": output_dir / "corpus" / "clean_report.json",
        "laws_dir": output_dir / "laws",
        "pairs": output_dir / "qa" / "pairs.jsonl",
        "records": output_dir / "dataset" / "records.jsonl",
        "split": output_dir / "dataset" / "split.json",
        "train": output_dir / "dataset" / "train.jsonl",
        "val": output_dir / "dataset" / "val.jsonl",
        "test": output_dir / "dataset" / "test.jsonl",
        "stats_dir": output_dir / "stats",
        "eval_report": output_dir / "eval" / "report.json",
        "train_config": output_dir / "train_config.json",
        "cache_dir": output_dir / "cache",
        "manifests_dir": output_dir / "manifests",
    }


def _require_artifact(path: Path, producer: str) -> None:
    if not path.exists():
        raise ArtifactError(f"missing artifact {path}; run '{producer}' first")


def _guard_outputs(outputs: list[Path], force: bool) -> None:
    for path in outputs:
        exists = path.is_file() or (path.is_dir() and any(path.iterdir()))
        if exists and not force:
            raise ArtifactError(
                f"artifact {path} already exists; pass --force or use a fresh --output-dir"
            )


def _hash_path(path: Path) -> str:
    digest = hashlib.sha256()
    if path.is_file():
        digest.update(path.read_bytes())
    elif path.is_dir():
        for item in sorted(p for p in path.rglob("*") if p.is_file()):
            digest.update(item.relative_to(path).as_posix().encode("utf-8"))
            digest.update(b"\x00")
            digest.update(hashlib.sha256(item.read_bytes()).digest())
    return digest.hexdigest()


def _write_run_manifest(
    cfg: PipelineConfig, subcommand: str, inputs: dict[str, Path], counts: dict[str, int]
) -> None:
    manifests = _paths(cfg.output_dir)["manifests_dir"]
    manifests.mkdir(parents=True, exist_ok=True)
    payload = {
        "subcommand": subcommand,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.snapshot(),
        "inputs": {
            name: {"path": str(path), "sha256": _hash_path(path)}
            for name, path in inputs.items()
        },
        "counts": counts,
    }
    (manifests / f"{subcommand}.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _write_documents(docs: list[LawDocument], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(dataclasses.asdict(doc), ensure_ascii=False) + "\n")


def _read_documents(path: Path) -> list[LawDocument]:
    docs = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                docs.append(LawDocument(**json.loads(line)))
    return docs


# -- subcommands --------------------------------------------------------------


def cmd_ingest(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    _guard_outputs([paths["documents"]], args.force)
    docs = load_corpus(cfg.corpus_dir, cfg.corpus_manifest)
    docs = [infer_metadata(doc) for doc in docs]
    _write_documents(docs, paths["documents"])
    _write_run_manifest(cfg, "ingest", {"corpus_dir": cfg.corpus_dir}, {"documents": len(docs)})
    logger.info("ingested %d documents", len(docs))
    return 0


def cmd_clean(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    _require_artifact(paths["documents"], "ingest")
    _guard_outputs([paths["cleaned"], paths["clean_report"]], args.force)

    docs = _read_documents(paths["documents"])
    disabled = cfg.disabled_rules
    cleaned_docs = []
    aggregate = {
        "documents": len(docs),
        "chars_removed": 0,
        "lines_joined": 0,
        "runs_collapsed": 0,
        "rule_hits": {},
    }
    for doc in docs:
        cleaned, report = clean_text(doc.raw_text, disabled=disabled)
        cleaned_docs.append(dataclasses.replace(doc, cleaned_text=cleaned))
        aggregate["chars_removed"] += report.chars_removed
        aggregate["lines_joined"] += report.lines_joined
        aggregate["runs_collapsed"] += report.runs_collapsed
        for rule, hits in report.rule_hits.items():
            aggregate["rule_hits"][rule] = aggregate["rule_hits"].get(rule, 0) + hits

    _write_documents(cleaned_docs, paths["cleaned"])
    paths["clean_report"].write_text(
        json.dumps(aggregate, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if args.print_report:
        print(json.dumps(aggregate, indent=2, sort_keys=True))
    _write_run_manifest(
        cfg, "clean", {"documents": paths["documents"]}, {"documents": len(docs)}
    )
    return 0


def cmd_segment(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    _require_artifact(paths["cleaned"], "clean")
    _guard_outputs([paths["laws_dir"]], args.force)

    docs = _read_documents(paths["cleaned"])
    total_articles = 0
    for doc in docs:
        law = segment_articles(doc)
        total_articles += len(law.articles)
        out = paths["laws_dir"] / f"{doc.id}.json"
        out.parent.mkdir(parents=True, exist_ok=True)
        write_law_json(law, out)
    _write_run_manifest(
        cfg,
        "segment",
        {"cleaned": paths["cleaned"]},
        {"laws": len(docs), "articles": total_articles},
    )
    logger.info("segmented %d laws into %d articles", len(docs), total_articles)
    return 0


def _generation_specs(laws_dir: Path, num_questions: int) -> list[tuple[str, int, PromptSpec]]:
    specs = []
    for law_path in sorted(laws_dir.rglob("*.json")):
        law = read_law_json(law_path)
        for article in law.articles:
            if article.article_number == 0 or not article.body.strip():
                continue
            specs.append(
                (
                    law.law_id,
                    article.article_number,
                    PromptSpec(
                        law_title=law.law_title or law.law_id,
                        article_number=article.article_number,
                        legal_text=article.body,
                        num_questions=num_questions,
                    ),
                )
            )
    return specs


def cmd_generate(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    _require_artifact(paths["laws_dir"], "segment")
    _guard_outputs([paths["pairs"]], args.force)
    if not cfg.provider.base_url or not cfg.provider.model_name:
        raise ConfigError("generate needs --provider-url and --model (or config values)")

    specs = _generation_specs(paths["laws_dir"], cfg.num_questions_per_article)
    client = ChatClient(cfg.provider, paths["cache_dir"])

    def one(spec: PromptSpec):
        return client.complete([{"role": "user", "content": build_prompt(spec)}])

    failures = 0
    rows: list[dict] = []
    with ThreadPoolExecutor(max_workers=cfg.provider.max_concurrency) as pool:
        futures = [(entry, pool.submit(one, entry[2])) for entry in specs]
        for (law_id, number, spec), future in futures:
            try:
                completion = future.result()
                pairs = parse_llm_output(completion.content, spec.num_questions)
            except LexforgeError as exc:
                logger.warning("article %s of %s failed: %s", number, law_id, exc)
                failures += 1
                continue
            article = Article(
                law_id=law_id, article_number=number, heading_text="", body=spec.legal_text
            )
            for pair in pairs:
                qa = QAPair(
                    question=pair["question"],
                    answer=pair["answer"],
                    law_id=law_id,
                    article_number=number,
                    provider=cfg.provider.base_url,
                    model_name=cfg.provider.model_name,
                    created_at=completion.created_at,
                )
                report = validate_qa(qa, article)
                if not report.passed and not args.keep_invalid:
                    logger.warning(
                        "dropping invalid pair for article %s of %s: failed %s",
                        number,
                        law_id,
                        sorted(k for k, v in report.checks.items() if not v),
                    )
                    continue
                row = dataclasses.asdict(qa)
                row["passed"] = report.passed
                row["checks"] = report.checks
                rows.append(row)

    paths["pairs"].parent.mkdir(parents=True, exist_ok=True)
    with paths["pairs"].open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    _write_run_manifest(
        cfg,
        "generate",
        {"laws_dir": paths["laws_dir"]},
        {
            "prompts": len(specs),
            "pairs_kept": len(rows),
            "failures": failures,
            "network_calls": client.stats.network_calls,
            "cache_hits": client.stats.cache_hits,
        },
    )
    logger.info(
        "generated %d pairs from %d prompts (%d failures, %d cache hits)",
        len(rows),
        len(specs),
        failures,
        client.stats.cache_hits,
    )
    return 1 if failures else 0


def _article_index(laws_dir: Path) -> dict[tuple[str, int], object]:
    index = {}
    for law_path in sorted(laws_dir.rglob("*.json")):
        law = read_law_json(law_path)
        for article in law.articles:
            index.setdefault((law.law_id, article.article_number), article)
    return index


def cmd_assemble(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    _require_artifact(paths["pairs"], "generate")
    _require_artifact(paths["laws_dir"], "segment")
    _guard_outputs([paths["records"]], args.force)

    index = _article_index(paths["laws_dir"])
    records = []
    pairs_in = 0
    with paths["pairs"].open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            pairs_in += 1
            qa = QAPair(
                question=row["question"],
                answer=row["answer"],
                law_id=row["law_id"],
                article_number=row["article_number"],
                provider=row.get("provider", ""),
                model_name=row.get("model_name", ""),
                created_at=row.get("created_at", ""),
            )
            article = index.get((qa.law_id, qa.article_number))
            if article is None:
                raise ArtifactError(
                    f"pair references unknown article {qa.article_number} of {qa.law_id}"
                )
            records.append(assemble_record(article, qa, cfg.system_preamble))

    deduped = dedup_records(records)
    export_jsonl(deduped, paths["records"])
    _write_run_manifest(
        cfg,
        "assemble",
        {"pairs": paths["pairs"], "laws_dir": paths["laws_dir"]},
        {
            "pairs_in": pairs_in,
            "records": len(deduped),
            "duplicates_removed": len(records) - len(deduped),
        },
    )
    logger.info("assembled %d records (%d duplicates removed)", len(deduped), len(records) - len(deduped))
    return 0


def cmd_stats(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    source = args.input or paths["records"]
    _require_artifact(Path(source), "assemble")
    stats_dir = paths["stats_dir"]
    _guard_outputs([stats_dir / "stats.json"], args.force)

    records = import_jsonl(source)
    counter = (
        tokenizer_file_counter(cfg.tokenizer_vocab)
        if cfg.tokenizer_vocab
        else whitespace_token_count
    )
    stats = compute_stats(records, counter, bucket_width=args.bucket_width)
    stats_dir.mkdir(parents=True, exist_ok=True)
    payload = dataclasses.asdict(stats)
    payload["histogram"] = [list(pair) for pair in stats.histogram]
    (stats_dir / "stats.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    emit_plot_data(stats, stats_dir)
    _write_run_manifest(
        cfg, "stats", {"records": Path(source)}, {"records": stats.record_count}
    )
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_split(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    _require_artifact(paths["records"], "assemble")
    _guard_outputs([paths["split"]], args.force)

    records = import_jsonl(paths["records"])
    train, val, test = split_dataset(records, cfg.split)
    position = {record: i for i, record in enumerate(records)}
    assignment = {
        "spec": dataclasses.asdict(cfg.split),
        "train": [position[r] for r in train],
        "val": [position[r] for r in val],
        "test": [position[r] for r in test],
    }
    paths["split"].parent.mkdir(parents=True, exist_ok=True)
    paths["split"].write_text(
        json.dumps(assignment, indent=2) + "\n", encoding="utf-8"
    )
    _write_run_manifest(
        cfg,
        "split",
        {"records": paths["records"]},
        {"train": len(train), "val": len(val), "test": len(test)},
    )
    logger.info("split sizes: train=%d val=%d test=%d", len(train), len(val), len(test))
    return 0


def cmd_export(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    _require_artifact(paths["records"], "assemble")
    _require_artifact(paths["split"], "split")
    outputs = [paths["train"], paths["val"], paths["test"]]
    _guard_outputs(outputs, args.force)

    records = import_jsonl(paths["records"])
    assignment = json.loads(paths["split"].read_text(encoding="utf-8"))
    counts = {}
    for name, out in zip(("train", "val", "test"), outputs):
        subset = [records[i] for i in assignment[name]]
        export_jsonl(subset, out)
        counts[name] = len(subset)
    _write_run_manifest(
        cfg, "export", {"records": paths["records"], "split": paths["split"]}, counts
    )
    logger.info("exported %s", counts)
    return 0


def cmd_eval(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    _guard_outputs([paths["eval_report"]], args.force)
    if not cfg.provider.base_url or not cfg.provider.model_name:
        raise ConfigError("eval needs --provider-url and --model (or config values)")
    cases = read_eval_cases(args.cases)
    outcomes = run_eval(
        cases, cfg.provider, cfg.system_preamble, cache_dir=paths["cache_dir"]
    )
    write_eval_report(outcomes, paths["eval_report"])
    failures = sum(1 for o in outcomes if all(v == "n-a" for v in o.checks.values()))
    _write_run_manifest(
        cfg,
        "eval",
        {"cases": Path(args.cases)},
        {"cases": len(cases), "transport_failures": failures},
    )
    logger.info("evaluated %d cases (%d transport failures)", len(cases), failures)
    return 0


def cmd_emit_train_config(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    paths = _paths(cfg.output_dir)
    out = args.out or paths["train_config"]
    _guard_outputs([Path(out)], args.force)
    overrides = {
        key: value
        for key, value in {
            "base_model": args.base_model,
            "epochs": args.epochs,
            "learning_rate": args.learning_rate,
            "warmup_ratio": args.warmup_ratio,
            "optimizer": args.optimizer,
            "lora_rank": args.lora_rank,
            "batch_size": args.batch_size,
        }.items()
        if value is not None
    }
    config = emit_training_config(overrides, out)
    _write_run_manifest(cfg, "emit-train-config", {}, {})
    print(json.dumps(dataclasses.asdict(config), indent=2))
    return 0


# -- argument parsing ---------------------------------------------------------


def _parse_split_flag(value: str) -> dict:
    parts = value.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--split needs three comma-separated fractions")
    try:
        train, val, test = (float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --split value: {exc}") from exc
    return {"train_frac": train, "val_frac": val, "test_frac": test}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON pipeline config; flags win")
    common.add_argument("--corpus-dir", type=Path)
    common.add_argument("--output-dir", type=Path)
    common.add_argument("--manifest", type=Path, help="corpus metadata manifest JSON")
    common.add_argument("--num-questions", type=int, dest="num_questions")
    common.add_argument("--seed", type=int)
    common.add_argument("--split", type=_parse_split_flag, dest="split_fractions")
    common.add_argument("--group-by-law", action="store_true", default=None)
    common.add_argument("--provider-url")
    common.add_argument("--model")
    common.add_argument("--max-concurrency", type=int)
    common.add_argument("--rps", type=float)
    common.add_argument("--max-retries", type=int)
    common.add_argument("--temperature", type=float)
    common.add_argument("--api-key-env")
    common.add_argument("--tokenizer-vocab", type=Path)
    common.add_argument("--system-preamble")
    common.add_argument("--force", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="lexforge",
        description="Build, profile, and evaluate a synthetic legal-QA instruct dataset.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("ingest", parents=[common]).set_defaults(func=cmd_ingest)

    p_clean = sub.add_parser("clean", parents=[common])
    for rule in RULE_NAMES:
        p_clean.add_argument(
            f"--no-{rule.replace('_', '-')}",
            dest=f"no_{rule}",
            action="store_true",
            help=f"disable the {rule} rule",
        )
    p_clean.add_argument("--print-report", action="store_true")
    p_clean.set_defaults(func=cmd_clean)

    sub.add_parser("segment", parents=[common]).set_defaults(func=cmd_segment)

    p_generate = sub.add_parser("generate", parents=[common])
    p_generate.add_argument(
        "--keep-invalid",
        action="store_true",
        help="keep pairs that fail validation (flagged) instead of dropping them",
    )
    p_generate.set_defaults(func=cmd_generate)

    sub.add_parser("assemble", parents=[common]).set_defaults(func=cmd_assemble)

    p_stats = sub.add_parser("stats", parents=[common])
    p_stats.add_argument("--input", type=Path, help="records JSONL (default: dataset/records.jsonl)")
    p_stats.add_argument("--bucket-width", type=int, default=50)
    p_stats.set_defaults(func=cmd_stats)

    sub.add_parser("split", parents=[common]).set_defaults(func=cmd_split)
    sub.add_parser("export", parents=[common]).set_defaults(func=cmd_export)

    p_eval = sub.add_parser("eval", parents=[common])
    p_eval.add_argument("--cases", required=True, type=Path)
    p_eval.set_defaults(func=cmd_eval)

    p_train = sub.add_parser("emit-train-config", parents=[common])
    p_train.add_argument("--out", type=Path)
    p_train.add_argument("--base-model")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--learning-rate", type=float)
    p_train.add_argument("--warmup-ratio", type=float)
    p_train.add_argument("--optimizer")
    p_train.add_argument("--lora-rank", type=int)
    p_train.add_argument("--batch-size", type=int)
    p_train.set_defaults(func=cmd_emit_train_config)

    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    provider = {
        key: value
        for key, value in {
            "base_url": args.provider_url,
            "model_name": args.model,
            "max_concurrency": args.max_concurrency,
            "requests_per_second": args.rps,
            "max_retries": args.max_retries,
            "temperature": args.temperature,
            "api_key_env": args.api_key_env,
        }.items()
        if value is not None
    }
    split = dict(args.split_fractions or {})
    if args.seed is not None:
        split["seed"] = args.seed
    if args.group_by_law:
        split["group_by_law"] = True
    cleaning = {
        rule: False for rule in RULE_NAMES if getattr(args, f"no_{rule}", False)
    }
    return load_pipeline_config(
        args.config,
        corpus_dir=args.corpus_dir,
        output_dir=args.output_dir,
        num_questions_per_article=args.num_questions,
        system_preamble=args.system_preamble,
        corpus_manifest=args.manifest,
        tokenizer_vocab=args.tokenizer_vocab,
        provider=provider,
        split=split,
        cleaning=cleaning,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config_from_args(args)
        return args.func(cfg, args)
    except (LexforgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
