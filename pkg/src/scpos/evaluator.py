"""Accuracy scoring for generated sequences.

Three accuracies: the text-label accuracy (exact equality of the decoded
label), the pair accuracy (matched gold pairs divided by total gold pairs),
and the joint accuracy (fraction of samples where the label is right and
every gold pair is matched). Pair matching is multiset intersection on
(polarity, span) with exact string equality after symmetric whitespace
trimming, so the order in which a model emits pairs never matters and
duplicated gold pairs must be matched as many times as they occur.

The pair accuracy aggregates two ways: micro (sum of matched over sum of
totals across the corpus) and macro (mean of per-sample ratios). The
definition in terms of "the actual sequence" reads per-sample, but the
corpus-level reading is equally defensible, so both are computed and every
report carries its aggregation tag; micro is the default headline.

Joint correctness deliberately ignores spurious extra pairs (matching the
metric's recall-only character); a strict variant requiring exact multiset
equality is available behind a flag.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from scpos.client import GenerationParams, InferenceClient, InferenceError
from scpos.codec import Mode, decode_output
from scpos.corpus import SchemaId, ScposRecord


class EvaluatorError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class SampleScore:
    sc_correct: bool
    pos_matched: int
    pos_total: int
    pos_ratio: float
    scpos_correct: bool
    sample_id: str = ""
    generation_failed: bool = False
    parse_warnings: int = 0

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "sc_correct": self.sc_correct,
            "pos_matched": self.pos_matched,
            "pos_total": self.pos_total,
            "pos_ratio": self.pos_ratio,
            "scpos_correct": self.scpos_correct,
            "generation_failed": self.generation_failed,
            "parse_warnings": self.parse_warnings,
        }


@dataclass
class EvalReport:
    acc_sc: float
    acc_pos: float
    acc_scpos: float
    aggregation: str
    runs: int
    per_run: list[tuple[float, float, float]]
    per_sample: list[SampleScore]  # run-major: all of run 1, then run 2, ...
    schema: SchemaId
    mode: Mode
    failed_generations: int = 0

    def to_json_dict(self) -> dict:
        return {
            "acc_sc": self.acc_sc,
            "acc_pos": self.acc_pos,
            "acc_scpos": self.acc_scpos,
            "aggregation": self.aggregation,
            "runs": self.runs,
            "schema": self.schema.value,
            "mode": self.mode.value,
            "failed_generations": self.failed_generations,
            "per_run": [
                {"acc_sc": sc, "acc_pos": pos, "acc_scpos": scpos}
                for sc, pos, scpos in self.per_run
            ],
            "per_sample": [score.to_json_dict() for score in self.per_sample],
        }


def _trimmed_pairs(pairs) -> Counter:
    return Counter((p.polarity.strip(), p.span.strip()) for p in pairs)


def score_sample(
    gold: ScposRecord,
    generated: str,
    schema: SchemaId | None = None,
    mode: Mode = Mode.SCPOS,
    strict: bool = False,
) -> SampleScore:
    """Score one generation against its gold record.

    In label-only mode the pair fields are vacuous (ratio 1); in pairs-only
    mode the label is vacuously correct. ``strict`` additionally requires the
    generated pair multiset to equal the gold multiset exactly for the joint
    flag (spurious extras then count against the sample).
    """
    if schema is None:
        schema = gold.schema
    parsed = decode_output(generated, schema, mode)

    if mode is Mode.POS_ONLY:
        sc_correct = True
    else:
        sc_correct = parsed.text_label == gold.text_label

    if mode is Mode.SC_ONLY:
        pos_matched, pos_total, pos_ratio = 0, 0, 1.0
        multiset_equal = True
    else:
        gold_counts = _trimmed_pairs(gold.pairs)
        generated_counts = _trimmed_pairs(parsed.pairs)
        pos_matched = sum((gold_counts & generated_counts).values())
        pos_total = sum(gold_counts.values())
        pos_ratio = 1.0 if pos_total == 0 else pos_matched / pos_total
        multiset_equal = gold_counts == generated_counts

    if strict:
        scpos_correct = sc_correct and multiset_equal
    else:
        scpos_correct = sc_correct and pos_ratio == 1.0

    return SampleScore(
        sc_correct=sc_correct,
        pos_matched=pos_matched,
        pos_total=pos_total,
        pos_ratio=pos_ratio,
        scpos_correct=scpos_correct,
        sample_id=gold.id,
        parse_warnings=len(parsed.warnings),
    )


def failed_score(gold: ScposRecord) -> SampleScore:
    """A failed generation scores 0 on every component."""
    return SampleScore(
        sc_correct=False,
        pos_matched=0,
        pos_total=len(gold.pairs),
        pos_ratio=0.0,
        scpos_correct=False,
        sample_id=gold.id,
        generation_failed=True,
    )


def aggregate(
    scores: Sequence[SampleScore], aggregation: str = "micro"
) -> tuple[float, float, float]:
    """(acc_sc, acc_pos, acc_scpos) over a score list.

    Micro pair accuracy sums matched/total over samples with at least one
    gold pair (all-empty corpora are vacuously 1); macro averages the
    per-sample ratios.
    """
    if not scores:
        raise EvaluatorError("cannot aggregate an empty score list")
    if aggregation not in ("micro", "macro"):
        raise EvaluatorError(f"unknown aggregation {aggregation!r}")
    count = len(scores)
    acc_sc = sum(s.sc_correct for s in scores) / count
    acc_scpos = sum(s.scpos_correct for s in scores) / count
    if aggregation == "macro":
        acc_pos = sum(s.pos_ratio for s in scores) / count
    else:
        matched = sum(s.pos_matched for s in scores if s.pos_total > 0)
        total = sum(s.pos_total for s in scores)
        acc_pos = 1.0 if total == 0 else matched / total
    return acc_sc, acc_pos, acc_scpos


def run_evaluation(
    gold_set: Sequence[ScposRecord],
    prompts: Sequence[str],
    client: InferenceClient,
    params: GenerationParams,
    runs: int = 3,
    mode: Mode = Mode.SCPOS,
    aggregation: str = "micro",
    strict: bool = False,
    workers: int = 1,
    on_progress: Callable[[int, int], None] | None = None,
) -> EvalReport:
    """Generate, decode, and score every sample ``runs`` times; the headline
    accuracies are the arithmetic mean over runs.

    ``prompts`` must align one-to-one with ``gold_set``. Each run salts the
    cache key, so repeated runs are distinct generations on a live endpoint
    yet still replayable. A failed generation is recorded, not fatal: the
    sample scores 0 on all components for that run.
    """
    if runs < 1:
        raise EvaluatorError("runs must be >= 1")
    if len(prompts) != len(gold_set):
        raise EvaluatorError(
            f"{len(prompts)} prompts for {len(gold_set)} gold records"
        )
    schemas = {record.schema for record in gold_set}
    if len(schemas) != 1:
        raise EvaluatorError(f"gold set mixes schemas: {sorted(s.value for s in schemas)}")
    (schema,) = schemas

    def generate_one(args: tuple[ScposRecord, str, int]) -> SampleScore:
        record, prompt, run_index = args
        try:
            result = client.generate(prompt, params, salt=f"run{run_index}")
        except InferenceError:
            return failed_score(record)
        return score_sample(record, result.completion, schema, mode, strict)

    per_run: list[tuple[float, float, float]] = []
    per_sample: list[SampleScore] = []
    total_jobs = runs * len(gold_set)
    done = 0
    for run_index in range(1, runs + 1):
        jobs = [(r, p, run_index) for r, p in zip(gold_set, prompts)]
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                run_scores = list(pool.map(generate_one, jobs))
        else:
            run_scores = [generate_one(job) for job in jobs]
        done += len(jobs)
        if on_progress is not None:
            on_progress(done, total_jobs)
        per_run.append(aggregate(run_scores, aggregation))
        per_sample.extend(run_scores)

    acc_sc = sum(r[0] for r in per_run) / runs
    acc_pos = sum(r[1] for r in per_run) / runs
    acc_scpos = sum(r[2] for r in per_run) / runs
    return EvalReport(
        acc_sc=acc_sc,
        acc_pos=acc_pos,
        acc_scpos=acc_scpos,
        aggregation=aggregation,
        runs=runs,
        per_run=per_run,
        per_sample=per_sample,
        schema=schema,
        mode=mode,
        failed_generations=sum(s.generation_failed for s in per_sample),
    )
