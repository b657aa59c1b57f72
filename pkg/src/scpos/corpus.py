"""Record/schema data model, JSONL corpus I/O, and train/eval set assembly."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable


class SchemaId(str, Enum):
    """The four annotation schemas.

    SRW holds only sentiment-related words (human/LLM annotated, five word
    labels including the negation-flipped pair). NVA/N/VA are rule-derived
    from the polarity lexicons, named after the POS categories they cover.
    """

    SRW = "SRW"
    NVA = "NVA"
    N = "N"
    VA = "VA"


TEXT_LABELS = ("positive", "negative")

# Word-polarity label candidates per schema, in canonical order. The order
# matters: serialized inputs list the candidates in exactly this sequence.
WORD_LABELS: dict[SchemaId, tuple[str, ...]] = {
    SchemaId.SRW: ("positive", "Xnegative", "neutral", "Xpositive", "negative"),
    SchemaId.NVA: ("positive", "neutral", "negative"),
    SchemaId.N: ("positive", "neutral", "negative"),
    SchemaId.VA: ("positive", "negative"),
}


class CorpusError(ValueError):
    """Raised for schema violations and malformed corpus files."""


@dataclass(frozen=True, slots=True)
class PWPair:
    """One (word-polarity label, word span) unit of word-level annotation."""

    polarity: str
    span: str

    def validate(self, schema: SchemaId) -> None:
        if self.polarity not in WORD_LABELS[schema]:
            raise CorpusError(
                f"polarity {self.polarity!r} not valid for schema {schema.value}"
            )
        if not self.span:
            raise CorpusError("pair span must be non-empty")


@dataclass(frozen=True, slots=True)
class ScposRecord:
    """One sample: text, text-level label, ordered PW pairs, schema id."""

    id: str
    text: str
    text_label: str
    pairs: tuple[PWPair, ...]
    schema: SchemaId

    def validate(self) -> None:
        if not self.text:
            raise CorpusError("record text must be non-empty")
        if self.text_label not in TEXT_LABELS:
            raise CorpusError(f"unknown text label {self.text_label!r}")
        for pair in self.pairs:
            pair.validate(self.schema)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "label": self.text_label,
            "pairs": [{"polarity": p.polarity, "span": p.span} for p in self.pairs],
            "schema": self.schema.value,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ScposRecord":
        try:
            schema = SchemaId(obj["schema"])
            pairs = tuple(
                PWPair(polarity=p["polarity"], span=p["span"]) for p in obj["pairs"]
            )
            record = cls(
                id=str(obj.get("id") or content_id(obj["text"], schema)),
                text=obj["text"],
                text_label=obj["label"],
                pairs=pairs,
                schema=schema,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"malformed record object: {exc}") from exc
        record.validate()
        return record


def content_id(text: str, schema: SchemaId) -> str:
    """Stable record id derived from (text, schema), for sources without ids."""
    digest = hashlib.sha256(f"{schema.value}\x00{text}".encode("utf-8")).hexdigest()
    return digest[:16]


@dataclass(frozen=True, slots=True)
class CorpusManifest:
    """How many records to draw from each pool when assembling a train corpus."""

    srw_count: int
    n_count: int
    va_count: int
    nva_count: int
    srw_weight: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.srw_weight < 1:
            raise CorpusError("srw_weight must be >= 1")


def read_corpus(path: str | Path) -> list[ScposRecord]:
    """Read a JSONL corpus, raising CorpusError (with the line number) on the
    first malformed or schema-invalid line. An empty file is an empty corpus."""
    records: list[ScposRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            try:
                records.append(ScposRecord.from_json_dict(obj))
            except CorpusError as exc:
                raise CorpusError(f"line {line_no}: {exc}") from exc
    return records


def write_corpus(records: Iterable[ScposRecord], path: str | Path) -> int:
    """Write records as JSONL (UTF-8, one object per line). Returns the count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            record.validate()
            handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def _draw(pool: list[ScposRecord], count: int, rng: random.Random, name: str) -> list[ScposRecord]:
    if count > len(pool):
        raise CorpusError(f"{name}: requested {count} records but pool has {len(pool)}")
    return rng.sample(pool, count)


def build_train_corpus(
    srw: list[ScposRecord],
    n: list[ScposRecord],
    va: list[ScposRecord],
    nva: list[ScposRecord],
    manifest: CorpusManifest,
) -> list[ScposRecord]:
    """Assemble the weighted training corpus.

    Draws the manifest counts from each pool, repeats the SRW slice
    ``srw_weight`` times, concatenates, and shuffles. Everything is driven by
    ``manifest.seed``, so two calls with equal inputs produce the same list.
    Output length is always ``srw_weight*srw_count + n_count + va_count +
    nva_count``; the distinct-sample count is the sum of the plain counts.
    """
    rng = random.Random(manifest.seed)
    srw_part = _draw(srw, manifest.srw_count, rng, "SRW")
    n_part = _draw(n, manifest.n_count, rng, "N")
    va_part = _draw(va, manifest.va_count, rng, "VA")
    nva_part = _draw(nva, manifest.nva_count, rng, "NVA")
    lines = srw_part * manifest.srw_weight + n_part + va_part + nva_part
    rng.shuffle(lines)
    return lines


def sample_eval_set(records: list[ScposRecord], count: int, seed: int) -> list[ScposRecord]:
    """Uniform sample without replacement, deterministic under the seed."""
    if count > len(records):
        raise CorpusError(f"requested {count} eval samples but pool has {len(records)}")
    return random.Random(seed).sample(records, count)
