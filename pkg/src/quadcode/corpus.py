"""Sentence corpora: JSONL ingestion, cross-lingual label transfer, splits.

A corpus is a JSONL file of sentence records. Labels move across languages
through sentence alignments: a labelled source sentence donates its label to
every aligned target sentence, which is how the Arabic training data is
derived from soft-labelled English text.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import rng
from .errors import InputError
from .ontology import CLASSES, CameoCode, OntologyError, QuadClass, QuadClassMap, parse_cameo_code, quad_of


class CorpusError(InputError):
    """Malformed sentence or alignment files, or inconsistent records."""


class MalformedRecordError(CorpusError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class DuplicateIdError(CorpusError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate record id {record_id!r}")
        self.record_id = record_id


class UnknownIdError(CorpusError):
    def __init__(self, record_id: str):
        super().__init__(f"alignment references unknown id {record_id!r}")
        self.record_id = record_id


class UnlabelledSourceError(CorpusError):
    def __init__(self, record_id: str):
        super().__init__(f"aligned source record {record_id!r} carries no label")
        self.record_id = record_id


class UnlabelledRecordError(CorpusError):
    def __init__(self, record_id: str):
        super().__init__(f"record {record_id!r} has no label")
        self.record_id = record_id


@dataclass(frozen=True)
class SentenceRecord:
    """One corpus sentence with optional QuadClass label and CAMEO code."""

    id: str
    lang: str
    text: str
    label: QuadClass | None = None
    cameo: CameoCode | None = None
    source: str | None = None


@dataclass(frozen=True)
class AlignmentPair:
    """Links a source-language sentence id to a target-language one."""

    src_id: str
    tgt_id: str


@dataclass
class LabelHistogram:
    """Per-class counts plus the count of unlabelled records."""

    counts: dict[QuadClass, int] = field(default_factory=lambda: {c: 0 for c in CLASSES})
    unlabelled: int = 0

    def add(self, label: QuadClass | None) -> None:
        if label is None:
            self.unlabelled += 1
        else:
            self.counts[label] += 1

    @property
    def total(self) -> int:
        return self.unlabelled + sum(self.counts.values())

    def lines(self) -> list[str]:
        width = max(len(c.value) for c in CLASSES)
        out = [f"{c.value:<{width}}  {self.counts[c]}" for c in CLASSES]
        out.append(f"{'no_label':<{width}}  {self.unlabelled}")
        return out


def _validate_lang(lang: str, line_no: int) -> str:
    if len(lang) != 2 or not lang.isascii() or not lang.isalpha() or not lang.islower():
        raise MalformedRecordError(line_no, f"lang must be a 2-letter ISO 639-1 code, got {lang!r}")
    return lang


def record_from_obj(obj: dict, line_no: int, quad_map: QuadClassMap | None = None) -> SentenceRecord:
    """Build a validated record from a parsed JSON object."""
    if not isinstance(obj, dict):
        raise MalformedRecordError(line_no, "record is not a JSON object")
    for key in ("id", "lang", "text"):
        if key not in obj:
            raise MalformedRecordError(line_no, f"missing required key {key!r}")
        if not isinstance(obj[key], str):
            raise MalformedRecordError(line_no, f"key {key!r} must be a string")
    if not obj["id"]:
        raise MalformedRecordError(line_no, "id must be non-empty")
    if not obj["text"]:
        raise MalformedRecordError(line_no, "text must be non-empty")
    _validate_lang(obj["lang"], line_no)

    label = None
    if obj.get("label") is not None:
        try:
            label = QuadClass(obj["label"])
        except ValueError:
            raise MalformedRecordError(line_no, f"unknown label {obj['label']!r}") from None
    cameo = None
    if obj.get("cameo") is not None:
        try:
            cameo = parse_cameo_code(obj["cameo"])
        except OntologyError as exc:
            raise MalformedRecordError(line_no, f"bad cameo code: {exc}") from None
    if label is not None and cameo is not None and quad_map is not None:
        expected = quad_of(cameo, quad_map)
        if expected is not label:
            raise MalformedRecordError(
                line_no, f"label {label.value} does not match cameo {cameo} (expected {expected.value})"
            )
    source = obj.get("source")
    if source is not None and not isinstance(source, str):
        raise MalformedRecordError(line_no, "source must be a string")
    return SentenceRecord(obj["id"], obj["lang"], obj["text"], label, cameo, source)


def record_to_obj(record: SentenceRecord) -> dict:
    """Canonical JSON object: fixed key order, optional keys omitted."""
    obj: dict = {"id": record.id, "lang": record.lang, "text": record.text}
    if record.label is not None:
        obj["label"] = record.label.value
    if record.cameo is not None:
        obj["cameo"] = record.cameo.digits
    if record.source is not None:
        obj["source"] = record.source
    return obj


def dumps_record(record: SentenceRecord) -> str:
    return json.dumps(record_to_obj(record), ensure_ascii=False, separators=(",", ":"))


def read_jsonl(path: str | Path, quad_map: QuadClassMap | None = None) -> list[SentenceRecord]:
    """Read and validate a sentence JSONL file.

    When quad_map is given, records carrying both a label and a cameo code
    are checked for consistency against it.
    """
    records: list[SentenceRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(line_no, f"invalid JSON: {exc.msg}") from None
            record = record_from_obj(obj, line_no, quad_map)
            if record.id in seen:
                raise DuplicateIdError(record.id)
            seen.add(record.id)
            records.append(record)
    return records


def write_jsonl(records: Iterable[SentenceRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(dumps_record(record) + "\n")


def read_alignments(path: str | Path) -> list[AlignmentPair]:
    """Read an alignment JSONL file ({"src_id": ..., "tgt_id": ...} per line)."""
    pairs: list[AlignmentPair] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(line_no, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict) or not isinstance(obj.get("src_id"), str) or not isinstance(obj.get("tgt_id"), str):
                raise MalformedRecordError(line_no, "alignment needs string keys 'src_id' and 'tgt_id'")
            pairs.append(AlignmentPair(obj["src_id"], obj["tgt_id"]))
    return pairs


def write_alignments(pairs: Iterable[AlignmentPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(json.dumps({"src_id": pair.src_id, "tgt_id": pair.tgt_id}, separators=(",", ":")) + "\n")


@dataclass
class TransferReport:
    """Bookkeeping for one label-transfer run."""

    pairs: int = 0
    labelled_targets: int = 0
    conflicts: int = 0
    dropped_targets: int = 0
    class_counts: dict[QuadClass, int] = field(default_factory=lambda: {c: 0 for c in CLASSES})

    def lines(self) -> list[str]:
        return [
            f"alignment pairs      {self.pairs}",
            f"targets labelled     {self.labelled_targets}",
            f"alignment conflicts  {self.conflicts}",
            f"targets dropped      {self.dropped_targets}",
        ]


def transfer_labels(
    src: Sequence[SentenceRecord],
    tgt: Sequence[SentenceRecord],
    pairs: Sequence[AlignmentPair],
) -> tuple[list[SentenceRecord], TransferReport]:
    """Copy labels from aligned source sentences onto target sentences.

    A source aligned to several targets labels all of them. A target aligned
    to several sources keeps the label of the first pair in file order; every
    later pair for that target is counted as a conflict. Targets that appear
    in no pair are dropped. Output preserves target file order.
    """
    src_by_id = {r.id: r for r in src}
    tgt_ids = {r.id for r in tgt}
    assigned: dict[str, tuple[QuadClass, CameoCode | None]] = {}
    report = TransferReport(pairs=len(pairs))
    for pair in pairs:
        source = src_by_id.get(pair.src_id)
        if source is None:
            raise UnknownIdError(pair.src_id)
        if pair.tgt_id not in tgt_ids:
            raise UnknownIdError(pair.tgt_id)
        if source.label is None:
            raise UnlabelledSourceError(source.id)
        if pair.tgt_id in assigned:
            report.conflicts += 1
            continue
        assigned[pair.tgt_id] = (source.label, source.cameo)

    out: list[SentenceRecord] = []
    for record in tgt:
        if record.id not in assigned:
            report.dropped_targets += 1
            continue
        label, cameo = assigned[record.id]
        out.append(replace(record, label=label, cameo=cameo))
        report.class_counts[label] += 1
    report.labelled_targets = len(out)
    return out, report


@dataclass(frozen=True)
class DatasetSplit:
    train: list[SentenceRecord]
    dev: list[SentenceRecord]
    test: list[SentenceRecord]
    seed: int
    fractions: tuple[float, float, float]


def _allocate(n: int, fractions: tuple[float, float, float]) -> list[int]:
    # Largest-remainder rounding: each bucket ends within 1 of n * fraction.
    exact = [n * f for f in fractions]
    base = [math.floor(e) for e in exact]
    leftover = n - sum(base)
    order = sorted(range(len(base)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def stratified_split(
    records: Sequence[SentenceRecord],
    fractions: tuple[float, float, float],
    seed: int,
) -> DatasetSplit:
    """Split labelled records into train/dev/test, stratified per class.

    Deterministic for a fixed seed; per-class counts in every split are
    within one record of exact proportionality.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise CorpusError(f"need three non-negative fractions, got {fractions!r}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise CorpusError(f"fractions must sum to 1, got {sum(fractions)!r}")
    seen: set[str] = set()
    by_class: dict[QuadClass, list[SentenceRecord]] = {c: [] for c in CLASSES}
    for record in records:
        if record.label is None:
            raise UnlabelledRecordError(record.id)
        if record.id in seen:
            raise DuplicateIdError(record.id)
        seen.add(record.id)
        by_class[record.label].append(record)

    buckets: tuple[list[SentenceRecord], ...] = ([], [], [])
    for quad in CLASSES:
        group = by_class[quad]
        order = rng.stream(seed, rng.SPLIT, quad.index).permutation(len(group))
        shuffled = [group[i] for i in order]
        counts = _allocate(len(group), tuple(fractions))
        at = 0
        for bucket, count in zip(buckets, counts):
            bucket.extend(shuffled[at : at + count])
            at += count
    return DatasetSplit(buckets[0], buckets[1], buckets[2], seed, tuple(fractions))


def class_histogram(records: Iterable[SentenceRecord]) -> LabelHistogram:
    hist = LabelHistogram()
    for record in records:
        hist.add(record.label)
    return hist
