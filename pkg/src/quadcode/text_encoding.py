"""Fixed-size numeric encodings of sentences.

Word route: shared tokenizer → vocabulary ids → embedding table rows.
Character route: codepoints of the lowercased text → alphabet ids feeding a
trainable character embedding (a corpus-derived alphabet generalizes the
fixed Latin alphabet of earlier character ConvNets to Arabic).

Index 0 is PAD and index 1 is UNK everywhere; PAD embedding rows stay zero.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .corpus import SentenceRecord
from .errors import InputError
from .softlabel import tokenize

PAD = 0
UNK = 1
_RESERVED = 2


class TextEncodingError(InputError):
    pass


class DimensionMismatchError(TextEncodingError):
    def __init__(self, line_no: int, got: int, want: int):
        super().__init__(f"embedding line {line_no}: vector has {got} values, expected {want}")
        self.line_no = line_no
        self.got = got
        self.want = want


class EmbeddingParseError(TextEncodingError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"embedding line {line_no}: {reason}")
        self.line_no = line_no


class VocabParseError(TextEncodingError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"vocabulary line {line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class VocabEntry:
    token: str
    index: int
    count: int


def _rank_and_index(counts: Counter, max_size: int | None, min_count: int) -> list[tuple]:
    """Shared ranking rule: count desc, then key ascending; ids from 2 up."""
    if max_size is not None and max_size < _RESERVED:
        raise TextEncodingError(f"max_size must leave room for PAD and UNK, got {max_size}")
    kept = [(k, c) for k, c in counts.items() if c >= min_count]
    kept.sort(key=lambda kc: (-kc[1], kc[0]))
    if max_size is not None:
        kept = kept[: max_size - _RESERVED]
    return kept


class Vocabulary:
    """Dense token→id map with PAD=0 and UNK=1 always present."""

    def __init__(self, entries: Iterable[VocabEntry]):
        self.entries: tuple[VocabEntry, ...] = tuple(entries)
        self._index: dict[str, int] = {}
        for pos, entry in enumerate(self.entries):
            want = pos + _RESERVED
            if entry.index != want:
                raise TextEncodingError(f"vocabulary indices not dense: {entry.token!r} has index {entry.index}, expected {want}")
            if entry.token in self._index:
                raise TextEncodingError(f"duplicate vocabulary token {entry.token!r}")
            self._index[entry.token] = entry.index

    @property
    def size(self) -> int:
        return len(self.entries) + _RESERVED

    def index_of(self, token: str) -> int:
        return self._index.get(token, UNK)

    def __contains__(self, token: str) -> bool:
        return token in self._index


class CharAlphabet:
    """Dense codepoint→id map; entries hold single-character tokens."""

    def __init__(self, entries: Iterable[VocabEntry]):
        self.entries: tuple[VocabEntry, ...] = tuple(entries)
        self._index: dict[str, int] = {}
        for pos, entry in enumerate(self.entries):
            want = pos + _RESERVED
            if entry.index != want:
                raise TextEncodingError(f"alphabet indices not dense: {entry.token!r} has index {entry.index}, expected {want}")
            if len(entry.token) != 1:
                raise TextEncodingError(f"alphabet entry must be a single codepoint, got {entry.token!r}")
            if entry.token in self._index:
                raise TextEncodingError(f"duplicate alphabet codepoint {entry.token!r}")
            self._index[entry.token] = entry.index

    @property
    def size(self) -> int:
        return len(self.entries) + _RESERVED

    def index_of(self, char: str) -> int:
        return self._index.get(char, UNK)

    def __contains__(self, char: str) -> bool:
        return char in self._index


def build_vocab(
    records: Iterable[SentenceRecord], max_size: int | None = None, min_count: int = 1
) -> Vocabulary:
    """Token ids ranked by (count desc, token lexicographic); deterministic.

    max_size counts the PAD/UNK slots, so at most max_size-2 real tokens.
    """
    counts: Counter = Counter()
    for record in records:
        counts.update(tokenize(record.text))
    kept = _rank_and_index(counts, max_size, min_count)
    return Vocabulary(VocabEntry(tok, i + _RESERVED, c) for i, (tok, c) in enumerate(kept))


def build_char_alphabet(
    records: Iterable[SentenceRecord], max_size: int | None = 256, min_count: int = 1
) -> CharAlphabet:
    """Most frequent codepoints of the lowercased texts, ties by codepoint."""
    counts: Counter = Counter()
    for record in records:
        counts.update(record.text.lower())
    kept = _rank_and_index(counts, max_size, min_count)
    return CharAlphabet(VocabEntry(ch, i + _RESERVED, c) for i, (ch, c) in enumerate(kept))


def _fit(indices: list[int], length: int) -> np.ndarray:
    if length < 1:
        raise TextEncodingError(f"encoded length must be >= 1, got {length}")
    out = np.full(length, PAD, dtype=np.int64)
    take = min(len(indices), length)
    out[:take] = indices[:take]
    return out


def encode_words(vocab: Vocabulary, tokens: Sequence[str], length: int) -> np.ndarray:
    """int64[length]: token ids, right-truncated and right-PADded."""
    return _fit([vocab.index_of(t) for t in tokens], length)


def encode_chars(alphabet: CharAlphabet, text: str, length: int) -> np.ndarray:
    """int64[length] over the codepoints of text.lower(), whitespace kept."""
    return _fit([alphabet.index_of(ch) for ch in text.lower()], length)


@dataclass(frozen=True)
class EncodedExample:
    """A model-ready example: fixed-length id vector plus class index."""

    indices: np.ndarray
    label: int

    def __post_init__(self):
        if self.indices.dtype != np.int64 or self.indices.ndim != 1:
            raise TextEncodingError("indices must be a 1-d int64 array")
        if not 0 <= self.label <= 3:
            raise TextEncodingError(f"label index out of range: {self.label}")


# --- embedding tables --------------------------------------------------------


@dataclass
class EmbeddingTable:
    """(vocab size × d) float64 matrix; row 0 is PAD and must stay zero."""

    matrix: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise TextEncodingError("embedding matrix must be 2-d")
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.matrix[PAD, :] = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def random_table(size: int, d: int, seed: int) -> EmbeddingTable:
    """uniform(-0.25, 0.25) per coordinate from the embedding rng stream."""
    gen = rng.stream(seed, rng.EMBED)
    return EmbeddingTable(gen.uniform(-0.25, 0.25, size=(size, d)))


def one_hot_table(size: int) -> EmbeddingTable:
    """Frozen identity rows (d == alphabet size); recovers one-hot inputs."""
    return EmbeddingTable(np.eye(size, dtype=np.float64), trainable=False)


def load_embeddings(path: str | Path, vocab: Vocabulary, d: int, seed: int) -> EmbeddingTable:
    """Text vectors `token v1 ... vd`; uncovered tokens drawn uniform(-0.25, 0.25).

    PAD stays zero and UNK counts as uncovered. Unknown file tokens are ignored.
    """
    table = random_table(vocab.size, d, seed)
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(" ")
        token, values = parts[0], parts[1:]
        if not token:
            raise EmbeddingParseError(line_no, "missing token")
        if len(values) != d:
            raise DimensionMismatchError(line_no, len(values), d)
        if token not in vocab:
            continue
        try:
            row = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingParseError(line_no, str(exc)) from None
        table.matrix[vocab.index_of(token)] = row
    table.matrix[PAD, :] = 0.0
    return table


# --- serialization -----------------------------------------------------------
#
# JSONL, one entry per line with fixed key order (token, index, count),
# entries in index order. The same bytes embed into checkpoint headers.


def _entry_obj(entry: VocabEntry) -> dict:
    return {"token": entry.token, "index": entry.index, "count": entry.count}


def _entry_from_obj(obj: object, line_no: int) -> VocabEntry:
    if not isinstance(obj, dict):
        raise VocabParseError(line_no, "expected a JSON object")
    try:
        token, index, count = obj["token"], obj["index"], obj["count"]
    except KeyError as exc:
        raise VocabParseError(line_no, f"missing key {exc.args[0]!r}") from None
    if not isinstance(token, str) or not isinstance(index, int) or not isinstance(count, int):
        raise VocabParseError(line_no, "bad field types")
    return VocabEntry(token, index, count)


def dumps_entries(entries: Iterable[VocabEntry]) -> str:
    return "".join(
        json.dumps(_entry_obj(e), ensure_ascii=False, separators=(",", ":")) + "\n" for e in entries
    )


def _parse_entries(text: str) -> list[VocabEntry]:
    entries = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise VocabParseError(line_no, f"bad JSON: {exc.msg}") from None
        entries.append(_entry_from_obj(obj, line_no))
    return entries


def write_vocab(vocab: Vocabulary | CharAlphabet, path: str | Path) -> None:
    Path(path).write_text(dumps_entries(vocab.entries), encoding="utf-8")


def read_vocab(path: str | Path) -> Vocabulary:
    return Vocabulary(_parse_entries(Path(path).read_text(encoding="utf-8")))


def read_char_alphabet(path: str | Path) -> CharAlphabet:
    return CharAlphabet(_parse_entries(Path(path).read_text(encoding="utf-8")))


# --- encoder bundles ---------------------------------------------------------
#
# Thin (table, length) pairs that checkpoints can embed and restore, so a
# saved model carries everything needed to encode raw text.


@dataclass(frozen=True)
class WordEncoder:
    vocab: Vocabulary
    length: int

    def encode(self, text: str) -> np.ndarray:
        return encode_words(self.vocab, tokenize(text), self.length)

    def to_json_obj(self) -> dict:
        return {
            "kind": "word",
            "length": self.length,
            "entries": [_entry_obj(e) for e in self.vocab.entries],
        }


@dataclass(frozen=True)
class CharEncoder:
    alphabet: CharAlphabet
    length: int

    def encode(self, text: str) -> np.ndarray:
        return encode_chars(self.alphabet, text, self.length)

    def to_json_obj(self) -> dict:
        return {
            "kind": "char",
            "length": self.length,
            "entries": [_entry_obj(e) for e in self.alphabet.entries],
        }


def encoder_from_json_obj(obj: dict) -> WordEncoder | CharEncoder:
    try:
        kind, length, raw_entries = obj["kind"], obj["length"], obj["entries"]
    except KeyError as exc:
        raise TextEncodingError(f"encoder object missing key {exc.args[0]!r}") from None
    if not isinstance(length, int) or not isinstance(raw_entries, list):
        raise TextEncodingError("encoder object has bad field types")
    entries = [_entry_from_obj(e, i + 1) for i, e in enumerate(raw_entries)]
    if kind == "word":
        return WordEncoder(Vocabulary(entries), length)
    if kind == "char":
        return CharEncoder(CharAlphabet(entries), length)
    raise TextEncodingError(f"unknown encoder kind {kind!r}")
