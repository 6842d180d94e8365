"""Single command-line entry point wiring all pipeline stages.

Exit codes: 0 success, 1 pipeline/validation error (one-line diagnostic on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .annotation import detect_language  # noqa: F401  (re-export for plugins)
from .annotation import parse_llm_response, sample_for_annotation
from .config import PipelineConfig, load_config, write_run_record
from .errors import PipelineError
from .jats import ingest_directory
from .packing import pack_corpus
from .stats import GROUP_MODES, render_table, score_distribution, write_report
from .store import (
    ShardInfo,
    iter_annotations,
    iter_corpus,
    iter_jsonl,
    validate_shards,
    write_annotations,
    write_shards,
)
from .variants import (
    VARIANT_NAMES,
    VariantConfig,
    build_variant,
    clinical_subset_record,
    extract_clinical_subset,
)

S = argparse.SUPPRESS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medcorpus", description=__doc__)
    parser.add_argument("--version", action="version", version=f"medcorpus {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI config file with a [pipeline] section")
        p.add_argument("--token-counter", dest="token_counter", default=S, help="token counter id (default: whitespace)")
        p.add_argument("--hash", dest="hash_algorithm", default=S, help="digest algorithm for manifests (default: sha256)")

    p = sub.add_parser("ingest", help="parse a JATS XML tree into corpus shards")
    p.add_argument("--input", required=True, help="directory tree of .xml files")
    p.add_argument("--output", required=True, help="corpus shard output directory")
    p.add_argument("--min-tokens", dest="min_tokens", type=int, default=S, help="paragraph token floor (default: 64)")
    p.add_argument("--shard-size", dest="shard_size", type=int, default=S, help="articles per shard (default: 100)")
    p.add_argument("--jobs", type=int, default=S, help="parser worker processes (default: 1)")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sample", help="draw a seed-reproducible paragraph sample")
    p.add_argument("--corpus", required=True, help="corpus shard directory")
    p.add_argument("--n", type=int, required=True, help="sample size in paragraphs")
    p.add_argument("--seed", type=int, default=S, help="sampling seed (default: 0)")
    p.add_argument("--output", required=True, help="output .jsonl of paragraph ids")
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("parse-responses", help="parse LLM responses into annotation records")
    p.add_argument("--input", required=True, help=".jsonl of {paragraph_id, response}")
    p.add_argument("--output", required=True, help="output annotations .jsonl")
    common(p)
    p.set_defaults(func=cmd_parse_responses)

    p = sub.add_parser("validate", help="check shard schema conformance and invariants")
    p.add_argument("path", help="shard directory or .jsonl file")
    p.add_argument("--kind", choices=("auto", "corpus", "variant", "annotations", "packed"), default="auto")
    p.add_argument("--min-tokens", dest="validate_min_tokens", type=int, default=0, help="enforce a paragraph token floor (default: 0 = off)")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build", help="build a dataset variant with manifest")
    p.add_argument("--variant", required=True, help=f"one of: {', '.join(v.replace('_', '-') for v in VARIANT_NAMES)}")
    p.add_argument("--corpus", required=True, help="corpus shard directory")
    p.add_argument("--annotations", required=True, help="annotation shards (file or directory)")
    p.add_argument("--output", required=True, help="variant output directory")
    p.add_argument("--edu-threshold", dest="edu_threshold", type=int, default=S, help="quality filter floor (default: 3)")
    p.add_argument("--factor", dest="replication_factor", type=int, default=S, help="upsampling factor (default: 10)")
    p.add_argument("--language", dest="language_target", default=S, help="language predicate target (default: fr)")
    p.add_argument("--shard-size", dest="shard_size", type=int, default=S, help="documents per shard (default: 100)")
    p.add_argument("--majority-mode", choices=("count", "tokens"), default="count", help="clinical majority rule (default: count)")
    common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("extract-clinical", help="extract the clinical-case paragraph subset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--output", required=True, help="output .jsonl")
    p.add_argument("--min-score", type=int, default=1, help="educational score floor (default: 1)")
    p.add_argument("--commercial-only", action="store_true", help="keep commercial-use licensed articles only")
    common(p)
    p.set_defaults(func=cmd_extract_clinical)

    p = sub.add_parser("pack", help="pack a variant into fixed-budget training documents")
    p.add_argument("--input", required=True, help="corpus or variant shard directory")
    p.add_argument("--context", dest="context_budget", type=int, default=S, help="token budget per window (default: 8192)")
    p.add_argument("--output", required=True, help="packed shard output directory")
    p.add_argument("--shard-size", dest="shard_size", type=int, default=S, help="windows per shard (default: 100)")
    common(p)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("stats", help="report educational score distributions")
    p.add_argument("--annotations", required=True)
    p.add_argument("--by", choices=GROUP_MODES, default="none", help="grouping dimension (default: none)")
    p.add_argument("--output", required=True, help="output report .json")
    p.add_argument("--plot", help="directory for histogram images (optional)")
    common(p)
    p.set_defaults(func=cmd_stats)

    return parser


def cmd_ingest(args, config: PipelineConfig) -> int:
    pairs = ingest_directory(args.input, config.min_tokens, config.token_counter, config.jobs)
    shards = write_shards((line for _, line in pairs), args.output, "corpus", config.shard_size, config.hash_algorithm)
    _write_corpus_manifest(args.output, shards, config)
    write_run_record("ingest", config, [args.input], args.output, __version__)
    articles = sum(s.records for s in shards)
    print(f"ingested {articles} articles into {len(shards)} shards under {args.output}")
    return 0


def _write_corpus_manifest(output: str, shards: list[ShardInfo], config: PipelineConfig) -> None:
    total_paragraphs = 0
    total_tokens = 0
    articles = 0
    for record in iter_jsonl(output):
        articles += 1
        total_paragraphs += len(record["paragraphs"])
        total_tokens += sum(p["token_count"] for p in record["paragraphs"])
    manifest = {
        "total_articles": articles,
        "total_paragraphs": total_paragraphs,
        "total_tokens": total_tokens,
        "min_tokens": config.min_tokens,
        "token_counter": config.token_counter,
        "hash_algorithm": config.hash_algorithm,
        "shards": [s.to_record() for s in shards],
    }
    path = Path(output) / "corpus_manifest.json"
    path.write_text(json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def cmd_sample(args, config: PipelineConfig) -> int:
    ids = sample_for_annotation(iter_corpus(args.corpus), args.n, config.seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for pid in ids:
            fh.write(json.dumps({"paragraph_id": pid}) + "\n")
    write_run_record("sample", config, [args.corpus], args.output, __version__)
    print(f"sampled {len(ids)} paragraph ids to {args.output}")
    return 0


def cmd_parse_responses(args, config: PipelineConfig) -> int:
    def annotations():
        for record in iter_jsonl(args.input):
            yield parse_llm_response(record["response"], record["paragraph_id"])

    n = write_annotations(annotations(), args.output)
    write_run_record("parse-responses", config, [args.input], args.output, __version__)
    print(f"parsed {n} responses to {args.output}")
    return 0


def cmd_validate(args, config: PipelineConfig) -> int:
    problems = validate_shards(args.path, args.kind, args.validate_min_tokens, config.token_counter)
    if problems:
        for problem in problems:
            print(f"invalid: {problem}", file=sys.stderr)
        return 1
    records = sum(1 for _ in iter_jsonl(args.path))
    print(f"OK: {args.path} ({records} records)")
    return 0


def cmd_build(args, config: PipelineConfig) -> int:
    variant = VariantConfig.for_variant(
        args.variant,
        edu_threshold=config.edu_threshold,
        replication_factor=config.replication_factor,
        language_target=config.language_target,
        clinical_majority_mode=args.majority_mode,
    )
    manifest = build_variant(
        variant,
        args.corpus,
        args.annotations,
        args.output,
        config.shard_size,
        config.token_counter,
        config.hash_algorithm,
    )
    write_run_record("build", config, [args.corpus, args.annotations], args.output, __version__)
    print(
        f"built {manifest.variant_name}: {len(manifest.entries)} articles, "
        f"{manifest.total_tokens} tokens, content_hash {manifest.content_hash[:12]}"
    )
    return 0


def cmd_extract_clinical(args, config: PipelineConfig) -> int:
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(out, "w", encoding="utf-8") as fh:
        for article, paragraph, annotation in extract_clinical_subset(
            args.corpus, args.annotations, args.min_score, args.commercial_only
        ):
            fh.write(json.dumps(clinical_subset_record(article, paragraph, annotation), ensure_ascii=False) + "\n")
            n += 1
    write_run_record("extract-clinical", config, [args.corpus, args.annotations], args.output, __version__)
    print(f"extracted {n} clinical case paragraphs to {args.output}")
    return 0


def cmd_pack(args, config: PipelineConfig) -> int:
    manifest = pack_corpus(
        args.input,
        args.output,
        config.context_budget,
        config.token_counter,
        config.shard_size,
        config.hash_algorithm,
    )
    write_run_record("pack", config, [args.input], args.output, __version__)
    print(f"packed {manifest['documents']} documents into {manifest['windows']} windows under {args.output}")
    return 0


def cmd_stats(args, config: PipelineConfig) -> int:
    distributions = score_distribution(iter_annotations(args.annotations), args.by)
    print(render_table(distributions))
    write_report(iter_annotations(args.annotations), args.by, args.output, args.plot)
    write_run_record("stats", config, [args.annotations], args.output, __version__)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = load_config(getattr(args, "config", None), vars(args))
        return args.func(args, config)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
