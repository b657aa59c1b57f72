"""Word-polarity dictionary loading, validation, and merging.

The canonical lexicon file is UTF-8 TSV with three columns:
``surface<TAB>pos_category<TAB>polarity``. Adapters translate the two
published Japanese polarity dictionary layouts into this canonical form:

* ``noun-dict`` — noun dictionary lines: ``surface<TAB>tag[<TAB>gloss...]``
  where the tag is ``p`` (positive), ``e`` (neutral), or ``n`` (negative).
* ``declinable-dict`` — verb/adjective dictionary lines:
  ``tag<TAB>expression`` where the tag starts with ポジ (positive) or
  ネガ (negative) and the expression may carry morpheme-separating spaces,
  which are removed to form the matchable surface.

Surfaces are NFC-normalized on load so that matching is stable across
composed/decomposed input. Nouns may be positive, neutral, or negative;
verbs and adjectives are binary (neutral is rejected).
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable


class PosCategory(str, Enum):
    NOUN = "noun"
    VERB = "verb"
    ADJECTIVE = "adjective"


class Polarity(str, Enum):
    POSITIVE = "positive"
    NEUTRAL = "neutral"
    NEGATIVE = "negative"


class ConflictPolicy(str, Enum):
    PREFER_VA = "prefer_va"
    PREFER_N = "prefer_n"
    ERROR = "error"


LEXICON_FORMATS = ("canonical", "noun-dict", "declinable-dict")

_NOUN_TAGS = {"p": Polarity.POSITIVE, "e": Polarity.NEUTRAL, "n": Polarity.NEGATIVE}


class LexiconError(ValueError):
    """Raised for unloadable files, empty lexicons, and merge conflicts."""


@dataclass(frozen=True, slots=True)
class LexiconEntry:
    surface: str
    pos_category: PosCategory
    polarity: Polarity

    def __post_init__(self) -> None:
        if not self.surface:
            raise LexiconError("entry surface must be non-empty")
        if (
            self.pos_category is not PosCategory.NOUN
            and self.polarity is Polarity.NEUTRAL
        ):
            raise LexiconError(
                f"{self.pos_category.value} entry {self.surface!r} cannot be neutral"
            )


@dataclass(frozen=True, slots=True)
class Rejection:
    """One skipped input line, reported alongside the loaded lexicon."""

    line_no: int
    raw: str
    reason: str

    def to_json_dict(self) -> dict:
        return {"line_no": self.line_no, "raw": self.raw, "reason": self.reason}


@dataclass(frozen=True, slots=True)
class Collision:
    """A surface present in both merge inputs; records which entry survived."""

    surface: str
    kept: LexiconEntry
    dropped: LexiconEntry


@dataclass(frozen=True)
class PolarityLexicon:
    """Immutable surface -> LexiconEntry map; safe for concurrent reads."""

    entries: dict[str, LexiconEntry]
    source_ids: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, surface: str) -> bool:
        return surface in self.entries

    def get(self, surface: str) -> LexiconEntry | None:
        return self.entries.get(surface)

    def surfaces(self) -> frozenset[str]:
        return frozenset(self.entries)

    def categories(self) -> frozenset[PosCategory]:
        return frozenset(e.pos_category for e in self.entries.values())

    def restrict_to(self, categories: Iterable[PosCategory]) -> "PolarityLexicon":
        wanted = frozenset(categories)
        kept = {s: e for s, e in self.entries.items() if e.pos_category in wanted}
        return PolarityLexicon(entries=kept, source_ids=self.source_ids)

    @classmethod
    def from_entries(
        cls, entries: Iterable[LexiconEntry], source_id: str = "<memory>"
    ) -> "PolarityLexicon":
        table: dict[str, LexiconEntry] = {}
        for entry in entries:
            if entry.surface in table:
                raise LexiconError(f"duplicate surface {entry.surface!r}")
            table[entry.surface] = entry
        return cls(entries=table, source_ids=(source_id,))


def _parse_canonical(line: str) -> LexiconEntry:
    columns = line.split("\t")
    if len(columns) != 3:
        raise LexiconError(f"expected 3 tab-separated columns, got {len(columns)}")
    surface, category_raw, polarity_raw = (c.strip() for c in columns)
    try:
        category = PosCategory(category_raw)
    except ValueError:
        raise LexiconError(f"unknown pos category {category_raw!r}") from None
    try:
        polarity = Polarity(polarity_raw)
    except ValueError:
        raise LexiconError(f"unknown polarity {polarity_raw!r}") from None
    return LexiconEntry(_nfc(surface), category, polarity)


def _parse_noun_dict(line: str) -> LexiconEntry:
    columns = line.split("\t")
    if len(columns) < 2:
        raise LexiconError("expected at least 2 tab-separated columns")
    surface, tag = columns[0].strip(), columns[1].strip()
    polarity = _NOUN_TAGS.get(tag)
    if polarity is None:
        raise LexiconError(f"unknown polarity tag {tag!r}")
    return LexiconEntry(_nfc(surface), PosCategory.NOUN, polarity)


def _parse_declinable_dict(line: str) -> LexiconEntry:
    columns = line.split("\t")
    if len(columns) < 2:
        raise LexiconError("expected at least 2 tab-separated columns")
    tag, expression = columns[0].strip(), columns[1].strip()
    if tag.startswith("ポジ"):
        polarity = Polarity.POSITIVE
    elif tag.startswith("ネガ"):
        polarity = Polarity.NEGATIVE
    else:
        raise LexiconError(f"unknown polarity tag {tag!r}")
    surface = _nfc(expression.replace(" ", "").replace("　", ""))
    # The source file mixes verbs and adjectives without marking which is
    # which; a trailing い is used as an adjective heuristic. The N/VA schema
    # split is unaffected since both categories belong to the VA side.
    category = PosCategory.ADJECTIVE if surface.endswith("い") else PosCategory.VERB
    return LexiconEntry(surface, category, polarity)


_PARSERS = {
    "canonical": _parse_canonical,
    "noun-dict": _parse_noun_dict,
    "declinable-dict": _parse_declinable_dict,
}


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def load_lexicon(
    path: str | Path, format: str = "canonical"
) -> tuple[PolarityLexicon, list[Rejection]]:
    """Load one dictionary file.

    Every well-formed line becomes an entry; every other line (wrong column
    count, unknown tag, blank, duplicate surface, neutral verb/adjective)
    becomes a Rejection, so that entry count + rejection count equals the
    file's line count. Raises LexiconError when the file is unreadable or
    contains zero valid entries.
    """
    parser = _PARSERS.get(format)
    if parser is None:
        raise LexiconError(f"unknown lexicon format {format!r} (choose from {LEXICON_FORMATS})")
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise LexiconError(f"lexicon file {path} is not valid UTF-8: {exc}") from exc

    entries: dict[str, LexiconEntry] = {}
    rejections: list[Rejection] = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            rejections.append(Rejection(line_no, line, "blank line"))
            continue
        try:
            entry = parser(stripped)
        except LexiconError as exc:
            rejections.append(Rejection(line_no, line, str(exc)))
            continue
        if entry.surface in entries:
            rejections.append(Rejection(line_no, line, f"duplicate surface {entry.surface!r}"))
            continue
        entries[entry.surface] = entry
    if not entries:
        raise LexiconError(f"zero valid entries in {path}")
    return PolarityLexicon(entries=entries, source_ids=(str(path),)), rejections


def merge(
    a: PolarityLexicon,
    b: PolarityLexicon,
    policy: ConflictPolicy = ConflictPolicy.PREFER_VA,
) -> tuple[PolarityLexicon, list[Collision]]:
    """Union of two lexicons; on surface collision the policy picks the survivor.

    prefer_va keeps the verb/adjective entry over the noun entry (prefer_n the
    reverse); when both colliding entries are on the same side the entry from
    ``b`` wins. policy=error raises on the first collision, naming the surface.
    """
    merged = dict(a.entries)
    collisions: list[Collision] = []
    for surface, entry_b in b.entries.items():
        entry_a = merged.get(surface)
        if entry_a is None:
            merged[surface] = entry_b
            continue
        if policy is ConflictPolicy.ERROR:
            raise LexiconError(f"surface collision on {surface!r} with policy=error")
        a_is_noun = entry_a.pos_category is PosCategory.NOUN
        b_is_noun = entry_b.pos_category is PosCategory.NOUN
        if a_is_noun == b_is_noun:
            winner, loser = entry_b, entry_a
        elif policy is ConflictPolicy.PREFER_VA:
            winner, loser = (entry_b, entry_a) if a_is_noun else (entry_a, entry_b)
        else:  # PREFER_N
            winner, loser = (entry_a, entry_b) if a_is_noun else (entry_b, entry_a)
        merged[surface] = winner
        collisions.append(Collision(surface=surface, kept=winner, dropped=loser))
    lexicon = PolarityLexicon(entries=merged, source_ids=a.source_ids + b.source_ids)
    return lexicon, collisions


def write_lexicon(lexicon: PolarityLexicon, path: str | Path) -> None:
    """Serialize to canonical TSV, sorted by surface for stable output."""
    with open(path, "w", encoding="utf-8") as handle:
        for surface in sorted(lexicon.entries):
            entry = lexicon.entries[surface]
            handle.write(
                f"{entry.surface}\t{entry.pos_category.value}\t{entry.polarity.value}\n"
            )


def write_rejections(rejections: Iterable[Rejection], path: str | Path) -> None:
    """Rejection report as JSON lines {line_no, raw, reason}."""
    with open(path, "w", encoding="utf-8") as handle:
        for rejection in rejections:
            handle.write(json.dumps(rejection.to_json_dict(), ensure_ascii=False))
            handle.write("\n")
