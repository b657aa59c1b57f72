"""Leftmost-longest dictionary matching over raw text.

Japanese has no word boundaries, so annotation works by direct substring
matching against the lexicon: scan left to right, at each position take the
longest dictionary surface starting there, emit it, and resume after its
end. Repeated occurrences are emitted in text order. No tokenizer, no
fuzzing — the rule is deliberately simple so that a brute-force scanner can
serve as an exact oracle.

The automaton is a character trie stored as nested dicts. A node maps each
next character to a child node; the reserved key ``None`` marks a surface
ending at that node and holds its LexiconEntry. Scanning does one dict
lookup per character walked, with an O(1) bail-out at positions where no
surface can start, which is what makes full-corpus annotation cheap.
"""

from __future__ import annotations

import unicodedata
from typing import NamedTuple

from scpos.corpus import PWPair, SchemaId, ScposRecord, content_id
from scpos.lexicon import LexiconEntry, PolarityLexicon, PosCategory


class MatcherError(ValueError):
    pass


class MatchSpan(NamedTuple):
    """One dictionary hit: text[start:end] == surface."""

    start: int
    end: int
    surface: str
    entry: LexiconEntry


# Which lexicon POS categories each rule-derived schema may contain.
SCHEMA_CATEGORIES: dict[SchemaId, frozenset[PosCategory]] = {
    SchemaId.N: frozenset({PosCategory.NOUN}),
    SchemaId.VA: frozenset({PosCategory.VERB, PosCategory.ADJECTIVE}),
    SchemaId.NVA: frozenset({PosCategory.NOUN, PosCategory.VERB, PosCategory.ADJECTIVE}),
}


class MatchAutomaton:
    """Trie over lexicon surfaces supporting longest-match scans."""

    __slots__ = ("_root", "_surfaces")

    def __init__(self, lexicon: PolarityLexicon) -> None:
        if len(lexicon) == 0:
            raise MatcherError("cannot build an automaton from an empty lexicon")
        root: dict = {}
        for surface, entry in lexicon.entries.items():
            node = root
            for char in surface:
                child = node.get(char)
                if child is None:
                    child = {}
                    node[char] = child
                node = child
            node[None] = entry
        self._root = root
        self._surfaces = lexicon.surfaces()

    def surfaces(self) -> frozenset[str]:
        """The exact pattern set the automaton recognizes."""
        return self._surfaces

    def __len__(self) -> int:
        return len(self._surfaces)

    def scan(self, text: str) -> list[MatchSpan]:
        """Leftmost-longest, non-overlapping matches in text order."""
        root = self._root
        n = len(text)
        spans: list[MatchSpan] = []
        i = 0
        while i < n:
            node = root.get(text[i])
            if node is None:
                i += 1
                continue
            best_end = 0
            best_entry = node.get(None)
            if best_entry is not None:
                best_end = i + 1
            j = i + 1
            while j < n:
                node = node.get(text[j])
                if node is None:
                    break
                j += 1
                entry = node.get(None)
                if entry is not None:
                    best_end = j
                    best_entry = entry
            if best_entry is not None:
                spans.append(MatchSpan(i, best_end, text[i:best_end], best_entry))
                i = best_end
            else:
                i += 1
        return spans


def build_automaton(lexicon: PolarityLexicon) -> MatchAutomaton:
    return MatchAutomaton(lexicon)


def match_text(automaton: MatchAutomaton, text: str) -> list[MatchSpan]:
    """Scan NFC-normalized text. Pure function; an empty result is valid."""
    return automaton.scan(text)


def annotate(
    record_text: str,
    text_label: str,
    lexicon: PolarityLexicon,
    schema: SchemaId,
    automaton: MatchAutomaton | None = None,
) -> ScposRecord:
    """Build a rule-annotated record: match the text, map each hit to a
    (polarity, surface) pair in occurrence order.

    Only the rule-derived schemas are accepted (SRW annotation comes from
    humans or a model, never from this matcher), and the lexicon must not
    carry POS categories outside the schema: N wants nouns only, VA wants
    verbs/adjectives only. Pass a prebuilt ``automaton`` when annotating many
    texts against the same lexicon. Text is NFC-normalized before matching
    and stored normalized, so spans always equal their record substrings.
    """
    allowed = SCHEMA_CATEGORIES.get(schema)
    if allowed is None:
        raise MatcherError(f"schema {schema.value} records are not rule-derived")
    extra = lexicon.categories() - allowed
    if extra:
        names = ", ".join(sorted(c.value for c in extra))
        raise MatcherError(f"lexicon carries {names} entries not allowed by schema {schema.value}")
    text = unicodedata.normalize("NFC", record_text)
    if automaton is None:
        automaton = build_automaton(lexicon)
    pairs = tuple(
        PWPair(polarity=span.entry.polarity.value, span=span.surface)
        for span in automaton.scan(text)
    )
    record = ScposRecord(
        id=content_id(text, schema),
        text=text,
        text_label=text_label,
        pairs=pairs,
        schema=schema,
    )
    record.validate()
    return record
