"""Dictionary-based soft labeling of sentences with CAMEO codes.

This is a deliberately simplified stand-in for a full parser-based event
coder: it assigns a sentence the CAMEO code of the leftmost-longest verb
phrase found in a pattern dictionary, with no constituency parsing and no
actor/role resolution. Good enough to mass-produce (noisy) QuadClass
training labels, which is its only job here.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import _parallel
from .corpus import LabelHistogram, SentenceRecord, read_jsonl, write_jsonl
from .errors import InputError
from .ontology import CameoCode, OntologyError, QuadClass, QuadClassMap, parse_cameo_code, quad_of


class SoftLabelError(InputError):
    """Bad verb patterns or dictionary files."""


class DuplicatePatternError(SoftLabelError):
    def __init__(self, tokens: tuple[str, ...]):
        super().__init__(f"pattern defined twice: {' '.join(tokens)!r}")
        self.tokens = tokens


class DictionaryParseError(SoftLabelError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"dictionary line {line_no}: {reason}")
        self.line_no = line_no


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding punctuation.

    Punctuation means Unicode category P*; interior punctuation survives
    ("u.s."), empty tokens are dropped. Pure and deterministic.
    """
    tokens = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and unicodedata.category(raw[start]).startswith("P"):
            start += 1
        while end > start and unicodedata.category(raw[end - 1]).startswith("P"):
            end -= 1
        if start < end:
            tokens.append(raw[start:end])
    return tokens


@dataclass(frozen=True)
class VerbPattern:
    """An ordered verb-phrase token sequence mapped to a CAMEO code."""

    tokens: tuple[str, ...]
    code: CameoCode

    def __post_init__(self):
        if not self.tokens:
            raise SoftLabelError("pattern needs at least one token")
        for token in self.tokens:
            if not token or any(ch.isspace() for ch in token):
                raise SoftLabelError(f"pattern token may not be empty or contain whitespace: {token!r}")
            if token != token.lower():
                raise SoftLabelError(f"pattern tokens must be lowercase: {token!r}")


@dataclass(frozen=True)
class MatchSpan:
    """A dictionary hit: tokens[start : start+length] matched `code`."""

    start: int
    length: int
    code: CameoCode


class _TrieNode:
    __slots__ = ("children", "code")

    def __init__(self):
        self.children: dict[str, _TrieNode] = {}
        self.code: CameoCode | None = None


class PatternDictionary:
    """Immutable token trie supporting longest-match lookup at a position.

    Construct through compile_dictionary(); lookup results depend only on
    the pattern set, never on insertion order.
    """

    def __init__(self, patterns: Iterable[VerbPattern]):
        self._root = _TrieNode()
        self._size = 0
        for pattern in patterns:
            node = self._root
            for token in pattern.tokens:
                node = node.children.setdefault(token, _TrieNode())
            if node.code is not None:
                raise DuplicatePatternError(pattern.tokens)
            node.code = pattern.code
            self._size += 1

    def __len__(self) -> int:
        return self._size

    def longest_match_at(self, tokens: Sequence[str], start: int) -> tuple[int, CameoCode] | None:
        """Longest pattern matching tokens[start:]; O(max pattern length)."""
        node = self._root
        best: tuple[int, CameoCode] | None = None
        for i in range(start, len(tokens)):
            node = node.children.get(tokens[i])
            if node is None:
                break
            if node.code is not None:
                best = (i - start + 1, node.code)
        return best


def compile_dictionary(patterns: Iterable[VerbPattern]) -> PatternDictionary:
    """Compile patterns into a lookup trie; duplicate sequences rejected."""
    return PatternDictionary(patterns)


def match_patterns(dictionary: PatternDictionary, tokens: Sequence[str]) -> list[MatchSpan]:
    """Non-overlapping leftmost-longest scan, spans sorted by start.

    At each position the longest matching pattern wins and scanning resumes
    right after it; positions with no match advance by one token.
    """
    spans: list[MatchSpan] = []
    pos = 0
    while pos < len(tokens):
        hit = dictionary.longest_match_at(tokens, pos)
        if hit is None:
            pos += 1
            continue
        length, code = hit
        spans.append(MatchSpan(pos, length, code))
        pos += length
    return spans


def label_sentence(
    dictionary: PatternDictionary,
    quad_map: QuadClassMap,
    text: str,
    actor_words: frozenset[str] | None = None,
) -> tuple[QuadClass, CameoCode] | None:
    """Label a sentence from its first dictionary hit, or return None.

    With actor_words set, a sentence is only labelled if at least one token
    is in that list (a minimal actor gate; off by default).
    """
    tokens = tokenize(text)
    if actor_words is not None and not any(t in actor_words for t in tokens):
        return None
    spans = match_patterns(dictionary, tokens)
    if not spans:
        return None
    code = spans[0].code
    return quad_of(code, quad_map), code


def code_corpus(
    dictionary: PatternDictionary,
    quad_map: QuadClassMap,
    in_path: str | Path,
    out_path: str | Path,
    actor_words: frozenset[str] | None = None,
) -> LabelHistogram:
    """Soft-label a sentence JSONL file; only labelled records are written.

    Returns the per-class histogram; histogram total equals the input record
    count (labelled + no-label). Output preserves input order.
    """
    records = read_jsonl(in_path)
    results = _parallel.ordered_map(
        lambda r: label_sentence(dictionary, quad_map, r.text, actor_words), records
    )
    hist = LabelHistogram()
    labelled: list[SentenceRecord] = []
    for record, result in zip(records, results):
        if result is None:
            hist.add(None)
            continue
        quad, code = result
        hist.add(quad)
        labelled.append(replace(record, label=quad, cameo=code))
    write_jsonl(labelled, out_path)
    return hist


# --- dictionary file format -------------------------------------------------
#
# One pattern per line: "token token ... -> CODE". '#' starts a comment.
# Tokens are lowercased on load.


def parse_dictionary(text: str) -> list[VerbPattern]:
    patterns: list[VerbPattern] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        phrase, sep, code_text = line.partition("->")
        if not sep:
            raise DictionaryParseError(line_no, f"expected 'tokens -> CODE', got {raw!r}")
        tokens = tuple(t.lower() for t in phrase.split())
        if not tokens:
            raise DictionaryParseError(line_no, "empty phrase")
        try:
            code = parse_cameo_code(code_text)
        except OntologyError as exc:
            raise DictionaryParseError(line_no, str(exc)) from None
        patterns.append(VerbPattern(tokens, code))
    return patterns


def load_dictionary(path: str | Path) -> PatternDictionary:
    return compile_dictionary(parse_dictionary(Path(path).read_text(encoding="utf-8")))


def load_actor_words(path: str | Path) -> frozenset[str]:
    """One actor word per line, '#' comments; tokens lowercased."""
    words = set()
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            words.add(line.lower())
    return frozenset(words)
