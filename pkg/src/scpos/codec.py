"""Fixed serialization of records into model input/target sequences, and
robust parsing of model completions back into (text label, PW pairs).

The wire grammar (the normative format for every component and fixture):

    input  (joint)      = text NL "<positive><negative>" NL text NL "POS" word-candidates
    input  (label only) = text NL "<positive><negative>"
    input  (pairs only) = text NL text NL "POS" word-candidates
    target (joint)      = "<" text-label ">" "POS" pair*
    target (label only) = "<" text-label ">"
    target (pairs only) = "POS" pair*
    pair                = polarity ":" span ";"
    word-candidates     = ("<" word-label ">")+        in schema order

Angle brackets mark label candidates and the chosen text label; the literal
cue ``POS`` announces the pair list; ``:`` starts a span and ``;`` ends it.
Spans must not contain ``:`` or ``;`` — there is no escaping, because
evaluation splits generated text on the raw delimiters, so such spans are
rejected at encode time.

Decoding is total: any string, including garbage, yields a ParsedOutput.
Problems are reported as warnings, never exceptions. Whitespace around
fragments is trimmed before validation (models emit stray spaces); the same
trimming is applied to gold pairs at scoring time, so the concession is
symmetric. Label matching is case-sensitive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from scpos.corpus import TEXT_LABELS, WORD_LABELS, PWPair, SchemaId, ScposRecord


class Mode(str, Enum):
    """Task shape: joint, text-label only, or word-pairs only."""

    SCPOS = "scpos"
    SC_ONLY = "sc_only"
    POS_ONLY = "pos_only"


class CodecError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class SerializedSequence:
    input_seq: str
    target_seq: str


@dataclass(slots=True)
class ParsedOutput:
    """Result of decoding a (possibly malformed) generated sequence."""

    text_label: str | None
    pairs: list[PWPair]
    warnings: list[str] = field(default_factory=list)


_LABEL_GROUP_RE = re.compile(r"<([^<>]*)>")
POS_CUE = "POS"


def _candidate_block(labels: tuple[str, ...]) -> str:
    return "".join(f"<{label}>" for label in labels)


def encode_input(record: ScposRecord, mode: Mode = Mode.SCPOS) -> str:
    """Render the model input sequence for a record."""
    text_candidates = _candidate_block(TEXT_LABELS)
    word_candidates = POS_CUE + _candidate_block(WORD_LABELS[record.schema])
    if mode is Mode.SCPOS:
        return f"{record.text}\n{text_candidates}\n{record.text}\n{word_candidates}"
    if mode is Mode.SC_ONLY:
        return f"{record.text}\n{text_candidates}"
    if mode is Mode.POS_ONLY:
        return f"{record.text}\n{record.text}\n{word_candidates}"
    raise CodecError(f"unknown mode {mode!r}")


def encode_target(record: ScposRecord, mode: Mode = Mode.SCPOS) -> str:
    """Render the gold output sequence for a record."""
    if mode is Mode.SC_ONLY:
        return f"<{record.text_label}>"
    parts = []
    for pair in record.pairs:
        if ":" in pair.span or ";" in pair.span:
            raise CodecError(
                f"span {pair.span!r} contains a delimiter and cannot be serialized"
            )
        parts.append(f"{pair.polarity}:{pair.span};")
    pair_list = "".join(parts)
    if mode is Mode.SCPOS:
        return f"<{record.text_label}>{POS_CUE}{pair_list}"
    if mode is Mode.POS_ONLY:
        return f"{POS_CUE}{pair_list}"
    raise CodecError(f"unknown mode {mode!r}")


def encode_record(record: ScposRecord, mode: Mode = Mode.SCPOS) -> SerializedSequence:
    return SerializedSequence(encode_input(record, mode), encode_target(record, mode))


def decode_output(
    generated: str, schema: SchemaId, mode: Mode = Mode.SCPOS
) -> ParsedOutput:
    """Parse arbitrary model text. Total: never raises on malformed input.

    The first ``<...>`` group is taken as the text label if it names a valid
    one. Everything after the first ``POS`` is split on ``;`` and each
    fragment at its first ``:``; fragments that fail validation (unknown
    polarity for the schema, missing colon, empty span) are dropped with a
    warning, as is any non-empty tail after the last ``;``.
    """
    warnings: list[str] = []
    text_label: str | None = None

    if mode is not Mode.POS_ONLY:
        group = _LABEL_GROUP_RE.search(generated)
        if group is None:
            warnings.append("no <...> text-label marker found")
        else:
            candidate = group.group(1).strip()
            if candidate in TEXT_LABELS:
                text_label = candidate
            else:
                warnings.append(f"unrecognized text label {candidate!r}")

    pairs: list[PWPair] = []
    if mode is not Mode.SC_ONLY:
        cue_at = generated.find(POS_CUE)
        if cue_at < 0:
            warnings.append("no POS marker found")
        else:
            word_labels = WORD_LABELS[schema]
            tail = generated[cue_at + len(POS_CUE):]
            for fragment in tail.split(";"):
                fragment = fragment.strip()
                if not fragment:
                    continue
                colon_at = fragment.find(":")
                if colon_at < 0:
                    warnings.append(f"fragment without ':' ignored: {fragment!r}")
                    continue
                polarity = fragment[:colon_at].strip()
                span = fragment[colon_at + 1:].strip()
                if polarity not in word_labels:
                    warnings.append(
                        f"polarity {polarity!r} not valid for schema {schema.value}; pair dropped"
                    )
                    continue
                if not span:
                    warnings.append(f"empty span for polarity {polarity!r}; pair dropped")
                    continue
                pairs.append(PWPair(polarity=polarity, span=span))

    return ParsedOutput(text_label=text_label, pairs=pairs, warnings=warnings)
