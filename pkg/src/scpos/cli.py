"""Command-line surface: lexicon validation/merging, corpus building, and
evaluation with report files.

Exit codes: 0 success, 1 validation failure, 2 I/O error, 3 endpoint
exhaustion (no sample could be generated).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

from scpos import __version__
from scpos.client import (
    ENV_CACHE_DIR,
    EndpointConfig,
    EndpointExhaustedError,
    InferenceClient,
    InferenceError,
    profile,
)
from scpos.codec import Mode
from scpos.corpus import (
    CorpusError,
    SchemaId,
    read_corpus,
    sample_eval_set,
    write_corpus,
)
from scpos.evaluator import EvaluatorError, run_evaluation
from scpos.lexicon import (
    LEXICON_FORMATS,
    ConflictPolicy,
    LexiconError,
    PolarityLexicon,
    load_lexicon,
    merge,
    write_lexicon,
    write_rejections,
)
from scpos.matcher import SCHEMA_CATEGORIES, MatcherError, annotate, build_automaton
from scpos.prompting import (
    PromptError,
    build_prompt,
    default_template,
    load_template,
    medium_length_band,
    select_icl_sample,
)
from scpos.report import format_table, write_report

_VALIDATION_ERRORS = (
    LexiconError,
    CorpusError,
    MatcherError,
    PromptError,
    EvaluatorError,
    InferenceError,
    ValueError,
)


def _parse_lexicon_arg(spec: str) -> tuple[str, str]:
    """Split FILE[:FORMAT]; the bare form means the canonical TSV."""
    head, sep, tail = spec.rpartition(":")
    if sep and tail in LEXICON_FORMATS:
        return head, tail
    return spec, "canonical"


def _load_merged_lexicon(
    specs: list[str], policy: ConflictPolicy, report_rejections: Path | None = None
) -> tuple[PolarityLexicon, int, int]:
    """Load and fold all sources left to right. Returns (lexicon, total
    rejections, total collisions)."""
    merged: PolarityLexicon | None = None
    rejections_total = 0
    collisions_total = 0
    all_rejections = []
    for spec in specs:
        path, format = _parse_lexicon_arg(spec)
        lexicon, rejections = load_lexicon(path, format)
        rejections_total += len(rejections)
        all_rejections.extend(rejections)
        if rejections:
            print(f"{path}: {len(lexicon)} entries, {len(rejections)} rejected lines")
        if merged is None:
            merged = lexicon
        else:
            merged, collisions = merge(merged, lexicon, policy)
            collisions_total += len(collisions)
    if report_rejections is not None:
        write_rejections(all_rejections, report_rejections)
    assert merged is not None
    return merged, rejections_total, collisions_total


# -- lexicon ------------------------------------------------------------


def cmd_lexicon(args: argparse.Namespace) -> int:
    if args.lexicon_command == "validate":
        lexicon, rejections = load_lexicon(args.path, args.format)
        print(f"{args.path}: {len(lexicon)} entries, {len(rejections)} rejected lines")
        for rejection in rejections[:20]:
            print(f"  line {rejection.line_no}: {rejection.reason}")
        if len(rejections) > 20:
            print(f"  ... and {len(rejections) - 20} more")
        if args.report:
            write_rejections(rejections, args.report)
            print(f"rejection report written to {args.report}")
        if args.strict and rejections:
            print("strict mode: rejections present", file=sys.stderr)
            return 1
        return 0

    # merge
    policy = ConflictPolicy(args.policy)
    merged: PolarityLexicon | None = None
    collisions_all = []
    for spec in args.path:
        path, format = _parse_lexicon_arg(spec)
        lexicon, rejections = load_lexicon(path, format)
        print(f"{path}: {len(lexicon)} entries, {len(rejections)} rejected lines")
        if args.strict and rejections:
            print("strict mode: rejections present", file=sys.stderr)
            return 1
        if merged is None:
            merged = lexicon
        else:
            merged, collisions = merge(merged, lexicon, policy)
            collisions_all.extend(collisions)
    assert merged is not None
    for collision in collisions_all:
        print(
            f"collision on {collision.surface!r}: kept "
            f"{collision.kept.pos_category.value}/{collision.kept.polarity.value}"
        )
    write_lexicon(merged, args.out)
    print(f"merged lexicon: {len(merged)} entries -> {args.out}")
    if args.collisions:
        with open(args.collisions, "w", encoding="utf-8") as handle:
            for collision in collisions_all:
                handle.write(
                    json.dumps(
                        {
                            "surface": collision.surface,
                            "kept": f"{collision.kept.pos_category.value}/{collision.kept.polarity.value}",
                            "dropped": f"{collision.dropped.pos_category.value}/{collision.dropped.polarity.value}",
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    return 0


# -- build --------------------------------------------------------------


def _read_source_texts(path: str | Path) -> list[tuple[str, str]]:
    """Source docs: JSONL with at least {"text", "label"} per line."""
    docs: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                docs.append((obj["text"], obj["label"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"line {line_no}: bad source doc ({exc})") from exc
    return docs


def cmd_build(args: argparse.Namespace) -> int:
    schema = SchemaId(args.schema)
    if schema not in SCHEMA_CATEGORIES:
        raise MatcherError(f"schema {schema.value} is not rule-derived; choose NVA, N, or VA")
    lexicon, _, _ = _load_merged_lexicon(args.lexicon, ConflictPolicy(args.policy))
    lexicon = lexicon.restrict_to(SCHEMA_CATEGORIES[schema])
    if len(lexicon) == 0:
        raise LexiconError(f"no lexicon entries match schema {schema.value}")
    docs = _read_source_texts(args.source)
    if args.limit is not None and args.limit < len(docs):
        import random

        docs = random.Random(args.seed).sample(docs, args.limit)

    automaton = build_automaton(lexicon)
    records = [
        annotate(text, label, lexicon, schema, automaton=automaton)
        for text, label in docs
    ]
    count = write_corpus(records, args.out)

    word_histogram: Counter = Counter()
    text_histogram: Counter = Counter()
    for record in records:
        text_histogram[record.text_label] += 1
        for pair in record.pairs:
            word_histogram[pair.polarity] += 1
    total_pairs = sum(word_histogram.values())
    print(f"wrote {count} {schema.value} records ({total_pairs} pairs) to {args.out}")
    print("text labels: " + " ".join(f"{k}={v}" for k, v in sorted(text_histogram.items())))
    print("word labels: " + " ".join(f"{k}={v}" for k, v in sorted(word_histogram.items())))
    return 0


# -- eval ---------------------------------------------------------------


@dataclass
class RunConfig:
    """Effective settings for one evaluation run (flags win over the config
    file, which wins over defaults). Snapshotted into every report."""

    gold: str
    mode: str = "scpos"
    runs: int = 3
    aggregation: str = "micro"
    params: str = "usa7b"
    seed: int | None = None
    sample_size: int | None = None
    endpoint: str | None = None
    model: str = "default"
    adapter: str = "openai-chat"
    timeout: float = 120.0
    max_retries: int = 4
    max_concurrency: int = 4
    cache_dir: str | None = None
    replay: bool = False
    template: str | None = None
    language: str = "ja"
    icl_pool: str | None = None
    icl_seed: int | None = None
    no_instruction: bool = False
    strict_scpos: bool = False
    workers: int = 1
    out: str = "eval-report"
    no_figure: bool = False

    @classmethod
    def from_sources(cls, args: argparse.Namespace, file_config: dict) -> "RunConfig":
        config = cls(gold=args.gold if args.gold is not None else file_config.get("gold", ""))
        for key in vars(config):
            if key == "gold":
                continue
            flag_value = getattr(args, key, None)
            if flag_value is not None:
                setattr(config, key, flag_value)
            elif key in file_config:
                setattr(config, key, file_config[key])
        return config

    def validate(self) -> None:
        if not self.gold:
            raise EvaluatorError("a gold corpus path is required")
        for label, path in (
            ("gold", self.gold),
            ("template", self.template),
            ("icl-pool", self.icl_pool),
        ):
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"{label} file not found: {path}")
        if self.sample_size is not None and self.seed is None:
            raise EvaluatorError("--seed is required when sampling with --sample-size")
        if self.icl_pool is not None and self.icl_seed is None:
            raise EvaluatorError("--icl-seed is required with --icl-pool")
        if self.runs < 1:
            raise EvaluatorError("--runs must be >= 1")


def cmd_eval(args: argparse.Namespace) -> int:
    file_config: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            file_config = json.load(handle)
    config = RunConfig.from_sources(args, file_config)
    config.validate()

    gold = read_corpus(config.gold)
    if not gold:
        raise EvaluatorError(f"gold corpus {config.gold} is empty")
    schemas = {record.schema for record in gold}
    if len(schemas) != 1:
        raise EvaluatorError("gold corpus mixes schemas; evaluate one schema at a time")
    (schema,) = schemas
    mode = Mode(config.mode)

    if config.sample_size is not None:
        gold = sample_eval_set(gold, config.sample_size, config.seed)

    icl_record = None
    if config.icl_pool:
        pool = read_corpus(config.icl_pool)
        icl_record = select_icl_sample(
            pool,
            excluded_ids={record.id for record in gold},
            length_band=medium_length_band(pool),
            seed=config.icl_seed,
        )
    if config.template:
        template = load_template(config.template, schema=schema)
        if icl_record is not None and template.icl_record is None:
            template = dataclasses.replace(template, icl_record=icl_record)
    else:
        template = default_template(schema, config.language, icl_record=icl_record)

    prompts = [
        build_prompt(template, record, mode, include_instruction=not config.no_instruction)
        for record in gold
    ]

    endpoint = None
    if not config.replay:
        endpoint = EndpointConfig.from_env(
            url=config.endpoint,
            model_id=config.model,
            adapter=config.adapter,
            timeout=config.timeout,
            max_retries=config.max_retries,
            max_concurrency=config.max_concurrency,
        )
    cache_dir = config.cache_dir or os.environ.get(ENV_CACHE_DIR)
    if config.replay and cache_dir is None:
        raise EvaluatorError("--replay requires a cache directory (--cache-dir or SCPOS_CACHE_DIR)")
    client = InferenceClient(
        endpoint, cache_dir=cache_dir, replay_only=config.replay, model_id=config.model
    )
    params = profile(config.params)

    def progress(done: int, total: int) -> None:
        print(f"generated {done}/{total}", file=sys.stderr)

    report = run_evaluation(
        gold,
        prompts,
        client,
        params,
        runs=config.runs,
        mode=mode,
        aggregation=config.aggregation,
        strict=config.strict_scpos,
        workers=config.workers,
        on_progress=progress,
    )

    snapshot = {"version": __version__, **asdict(config)}
    paths = write_report(report, config.out, snapshot, figures=not config.no_figure)
    print(format_table(report), end="")
    print(f"report files: {', '.join(str(p) for p in paths.values())}")

    total_jobs = report.runs * len(gold)
    if report.failed_generations == total_jobs:
        print("every generation failed; endpoint unusable", file=sys.stderr)
        return 3
    if report.failed_generations:
        print(
            f"warning: {report.failed_generations}/{total_jobs} generations failed",
            file=sys.stderr,
        )
    return 0


# -- parser -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scpos",
        description="Sentiment corpus construction and evaluation pipeline",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    lex = commands.add_parser("lexicon", help="validate or merge polarity dictionaries")
    lex_sub = lex.add_subparsers(dest="lexicon_command", required=True)
    validate = lex_sub.add_parser("validate", help="load one dictionary and report rejections")
    validate.add_argument("--path", required=True)
    validate.add_argument("--format", default="canonical", choices=LEXICON_FORMATS)
    validate.add_argument("--report", help="write rejections as JSONL")
    validate.add_argument("--strict", action="store_true", help="nonzero exit on any rejection")
    validate.set_defaults(func=cmd_lexicon)
    merge_cmd = lex_sub.add_parser("merge", help="merge dictionaries into canonical TSV")
    merge_cmd.add_argument(
        "--path", action="append", required=True, metavar="FILE[:FORMAT]",
        help="repeatable; FORMAT one of %s" % (LEXICON_FORMATS,),
    )
    merge_cmd.add_argument(
        "--policy", default="prefer_va", choices=[p.value for p in ConflictPolicy]
    )
    merge_cmd.add_argument("--out", required=True)
    merge_cmd.add_argument("--collisions", help="write collision report as JSONL")
    merge_cmd.add_argument("--strict", action="store_true")
    merge_cmd.set_defaults(func=cmd_lexicon)

    build = commands.add_parser("build", help="rule-annotate source texts into a corpus")
    build.add_argument("--schema", required=True, choices=["NVA", "N", "VA"])
    build.add_argument("--source", required=True, help="JSONL docs with text and label fields")
    build.add_argument(
        "--lexicon", action="append", required=True, metavar="FILE[:FORMAT]"
    )
    build.add_argument("--policy", default="prefer_va", choices=[p.value for p in ConflictPolicy])
    build.add_argument("--out", required=True)
    build.add_argument("--seed", type=int, required=True)
    build.add_argument("--limit", type=int, help="sample this many source docs (uses --seed)")
    build.set_defaults(func=cmd_build)

    evaluate = commands.add_parser("eval", help="run or replay an evaluation")
    evaluate.add_argument("--gold", help="gold corpus JSONL (single schema)")
    evaluate.add_argument("--mode", choices=[m.value for m in Mode])
    evaluate.add_argument("--runs", type=int)
    evaluate.add_argument("--aggregate", dest="aggregation", choices=["micro", "macro"])
    evaluate.add_argument("--params", choices=["usa7b", "short_output"])
    evaluate.add_argument("--seed", type=int)
    evaluate.add_argument("--sample-size", dest="sample_size", type=int)
    evaluate.add_argument("--endpoint", help="generation endpoint URL (or SCPOS_ENDPOINT)")
    evaluate.add_argument("--model", help="model id sent on the wire")
    evaluate.add_argument("--adapter", choices=["openai-chat", "raw"])
    evaluate.add_argument("--timeout", type=float)
    evaluate.add_argument("--max-retries", dest="max_retries", type=int)
    evaluate.add_argument("--max-concurrency", dest="max_concurrency", type=int)
    evaluate.add_argument("--cache-dir", dest="cache_dir", help="completion cache (or SCPOS_CACHE_DIR)")
    evaluate.add_argument("--replay", action="store_const", const=True, default=None,
                          help="serve completions from cache only")
    evaluate.add_argument("--template", help="prompt template JSON")
    evaluate.add_argument("--language", choices=["ja", "en"], help="packaged template language")
    evaluate.add_argument("--icl-pool", dest="icl_pool", help="corpus to draw the demonstration from")
    evaluate.add_argument("--icl-seed", dest="icl_seed", type=int)
    evaluate.add_argument("--no-instruction", dest="no_instruction",
                          action="store_const", const=True, default=None,
                          help="demonstration-only prompts")
    evaluate.add_argument("--strict-scpos", dest="strict_scpos",
                          action="store_const", const=True, default=None,
                          help="joint correctness requires exact pair multiset equality")
    evaluate.add_argument("--workers", type=int)
    evaluate.add_argument("--out", help="report output directory")
    evaluate.add_argument("--no-figure", dest="no_figure",
                          action="store_const", const=True, default=None)
    evaluate.add_argument("--config", help="JSON config file; flags win over file values")
    evaluate.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EndpointExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
