"""Shared builders for random-but-valid test data."""

from __future__ import annotations

import random

from scpos.corpus import WORD_LABELS, PWPair, SchemaId, ScposRecord, content_id
from scpos.lexicon import LexiconEntry, Polarity, PolarityLexicon, PosCategory

TEXT_CHARS = "あいうえおかきくけこ映画良退屈最高特に今日abcXYZ。、！ "
# Spans may contain anything except the pair delimiters; angle brackets and
# interior spaces are fair game.
SPAN_CHARS = "あいうえお景色料理天気abc<> 長"


def random_span(rng: random.Random, max_len: int = 6) -> str:
    while True:
        span = "".join(rng.choice(SPAN_CHARS) for _ in range(rng.randint(1, max_len)))
        span = span.strip()
        if span:
            return span


def random_record(rng: random.Random, schema: SchemaId | None = None) -> ScposRecord:
    if schema is None:
        schema = rng.choice(list(SchemaId))
    text = "".join(rng.choice(TEXT_CHARS) for _ in range(rng.randint(1, 40))).strip() or "本文"
    label = rng.choice(("positive", "negative"))
    labels = WORD_LABELS[schema]
    pairs = tuple(
        PWPair(polarity=rng.choice(labels), span=random_span(rng))
        for _ in range(rng.randint(0, 6))
    )
    return ScposRecord(
        id=content_id(text, schema) + f"-{rng.randrange(1 << 20):05x}",
        text=text,
        text_label=label,
        pairs=pairs,
        schema=schema,
    )


def make_record(
    text: str,
    label: str,
    pairs: list[tuple[str, str]],
    schema: SchemaId,
    record_id: str | None = None,
) -> ScposRecord:
    return ScposRecord(
        id=record_id or content_id(text, schema),
        text=text,
        text_label=label,
        pairs=tuple(PWPair(p, s) for p, s in pairs),
        schema=schema,
    )


def random_lexicon(
    rng: random.Random,
    size: int,
    alphabet: str,
    min_len: int = 1,
    max_len: int = 3,
    categories: tuple[PosCategory, ...] = (
        PosCategory.NOUN,
        PosCategory.VERB,
        PosCategory.ADJECTIVE,
    ),
) -> PolarityLexicon:
    entries: dict[str, LexiconEntry] = {}
    attempts = 0
    while len(entries) < size and attempts < size * 50:
        attempts += 1
        surface = "".join(
            rng.choice(alphabet) for _ in range(rng.randint(min_len, max_len))
        )
        if surface in entries:
            continue
        category = rng.choice(categories)
        if category is PosCategory.NOUN:
            polarity = rng.choice(list(Polarity))
        else:
            polarity = rng.choice((Polarity.POSITIVE, Polarity.NEGATIVE))
        entries[surface] = LexiconEntry(surface, category, polarity)
    return PolarityLexicon.from_entries(entries.values())
