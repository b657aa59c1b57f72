"""Prompt assembly: optional in-context demonstration + three-sentence
instruction + the encoded input.

The instruction is configuration, not code. Default sentence sets ship as
data files (Japanese for real runs, English for desk testing); sentence 1
says the preceding sequence is an example, sentence 2 asks for the overall
polarity with the two candidates marked, and sentence 3 asks the model to
list the sentiment-related words. Sentence 3 carries a ``{word_class}``
placeholder resolved per schema.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from scpos.codec import Mode, encode_input, encode_target
from scpos.corpus import SchemaId, ScposRecord


class PromptError(ValueError):
    pass


WORD_CLASS_PLACEHOLDER = "{word_class}"

# Canonical placeholder resolution for sentence 3.
WORD_CLASS_PHRASES: dict[SchemaId, str] = {
    SchemaId.SRW: "word",
    SchemaId.NVA: "noun, verb, and adjective",
    SchemaId.N: "noun",
    SchemaId.VA: "verb and adjective",
}

SECTION_SEPARATOR = "\n\n"


@dataclass(frozen=True)
class PromptTemplate:
    instruction_sentences: tuple[str, str, str]
    schema: SchemaId
    icl_record: ScposRecord | None = None
    word_class_phrases: Mapping[SchemaId, str] = field(
        default_factory=lambda: dict(WORD_CLASS_PHRASES)
    )

    def __post_init__(self) -> None:
        if len(self.instruction_sentences) != 3:
            raise PromptError(
                f"instruction must have exactly 3 sentences, got {len(self.instruction_sentences)}"
            )
        if WORD_CLASS_PLACEHOLDER not in self.instruction_sentences[2]:
            raise PromptError(
                f"sentence 3 must contain the {WORD_CLASS_PLACEHOLDER} placeholder"
            )
        if self.schema not in self.word_class_phrases:
            raise PromptError(f"no word-class phrase for schema {self.schema.value}")

    def resolved_instruction(self) -> str:
        phrase = self.word_class_phrases[self.schema]
        return "\n".join(
            sentence.replace(WORD_CLASS_PLACEHOLDER, phrase)
            for sentence in self.instruction_sentences
        )


def build_prompt(
    template: PromptTemplate,
    record: ScposRecord,
    mode: Mode = Mode.SCPOS,
    include_instruction: bool = True,
) -> str:
    """Concatenate [demonstration] + [instruction] + encoded input.

    The demonstration (encoded ICL input followed by its encoded target) is
    present iff the template carries an icl_record; dropping the instruction
    as well gives the demonstration-only prompt some chat models need.
    Sections are separated by blank lines.
    """
    if record.schema is not template.schema:
        raise PromptError(
            f"record schema {record.schema.value} != template schema {template.schema.value}"
        )
    sections: list[str] = []
    if template.icl_record is not None:
        if template.icl_record.schema is not template.schema:
            raise PromptError("ICL record schema does not match template schema")
        demonstration = (
            encode_input(template.icl_record, mode)
            + "\n"
            + encode_target(template.icl_record, mode)
        )
        sections.append(demonstration)
    if include_instruction:
        sections.append(template.resolved_instruction())
    sections.append(encode_input(record, mode))
    return SECTION_SEPARATOR.join(sections)


def select_icl_sample(
    pool: Sequence[ScposRecord],
    excluded_ids: set[str],
    length_band: tuple[int, int],
    seed: int,
) -> ScposRecord:
    """Uniform choice among pool records inside the length band and not excluded."""
    low, high = length_band
    candidates = [
        r for r in pool if low <= len(r.text) <= high and r.id not in excluded_ids
    ]
    if not candidates:
        raise PromptError("no candidate records for the demonstration sample")
    return random.Random(seed).choice(candidates)


def medium_length_band(
    pool: Sequence[ScposRecord], lower: float = 0.25, upper: float = 0.75
) -> tuple[int, int]:
    """Default "medium length": the [25th, 75th] percentile of pool text lengths."""
    if not pool:
        raise PromptError("empty pool")
    lengths = sorted(len(r.text) for r in pool)
    top = len(lengths) - 1
    return lengths[int(lower * top)], lengths[int(upper * top)]


def _template_from_obj(
    obj: dict,
    schema: SchemaId | None,
    icl_pool: Sequence[ScposRecord] | None,
    origin: str,
) -> PromptTemplate:
    sentences = obj.get("instruction")
    if not isinstance(sentences, list) or len(sentences) != 3:
        raise PromptError(f"{origin}: 'instruction' must be a list of 3 sentences")
    schema_value = obj.get("schema")
    if schema is None:
        if schema_value is None:
            raise PromptError(f"{origin}: no schema in file and none supplied")
        schema = SchemaId(schema_value)
    icl_record = None
    icl_id = obj.get("icl_record_id")
    if icl_id is not None:
        if icl_pool is None:
            raise PromptError(f"{origin}: icl_record_id set but no pool supplied")
        by_id = {r.id: r for r in icl_pool}
        icl_record = by_id.get(icl_id)
        if icl_record is None:
            raise PromptError(f"{origin}: icl_record_id {icl_id!r} not found in pool")
    phrases = dict(WORD_CLASS_PHRASES)
    for key, value in (obj.get("word_class_phrases") or {}).items():
        phrases[SchemaId(key)] = value
    return PromptTemplate(
        instruction_sentences=tuple(sentences),
        schema=schema,
        icl_record=icl_record,
        word_class_phrases=phrases,
    )


def load_template(
    path: str | Path,
    schema: SchemaId | None = None,
    icl_pool: Sequence[ScposRecord] | None = None,
) -> PromptTemplate:
    """Load a template file: JSON {instruction: [s1, s2, s3], schema, icl_record_id}."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        obj = json.load(handle)
    return _template_from_obj(obj, schema, icl_pool, str(path))


def default_template(
    schema: SchemaId,
    language: str = "ja",
    icl_record: ScposRecord | None = None,
) -> PromptTemplate:
    """One of the packaged instruction sets ('ja' or 'en')."""
    resource = resources.files("scpos").joinpath(f"data/templates/{language}.json")
    try:
        obj = json.loads(resource.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise PromptError(f"no packaged template for language {language!r}") from None
    template = _template_from_obj(obj, schema, None, f"templates/{language}.json")
    if icl_record is None:
        return template
    return PromptTemplate(
        instruction_sentences=template.instruction_sentences,
        schema=schema,
        icl_record=icl_record,
        word_class_phrases=template.word_class_phrases,
    )
