"""Streaming readers/writers and text normalization for parallel corpora.

Two on-disk formats:
  TSV   - UTF-8, LF line endings, columns source<TAB>target[<TAB>id].
  JSONL - one object per line with fields "src" (required), "tgt" (required),
          "id" (optional), "meta" (optional object of strings) and, on scored
          streams, "score" (number) and "scorer" (string).

Readers skip malformed lines with a warning and a counter rather than
aborting; memory use is O(1) in corpus length for both reading and writing.
"""
from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import FormatError
from .model import ScoredPair, SentencePair

log = logging.getLogger(__name__)


class CorpusFormat(Enum):
    TSV = "tsv"
    JSONL = "jsonl"

    @classmethod
    def parse(cls, name: str) -> "CorpusFormat":
        try:
            return cls(name.lower())
        except ValueError:
            raise FormatError(f"unknown corpus format: {name!r} (expected tsv or jsonl)")

    @classmethod
    def guess(cls, path: str | Path) -> "CorpusFormat":
        return cls.JSONL if str(path).endswith((".jsonl", ".ndjson")) else cls.TSV


def normalize(text: str) -> str:
    """Canonicalize text: collapse whitespace runs, trim, then Unicode NFC.

    No case folding and no punctuation changes; idempotent.
    """
    return unicodedata.normalize("NFC", " ".join(text.split()))


@dataclass
class ReadStats:
    """Per-reader counters; skipped counts malformed or empty lines."""

    read: int = 0
    skipped: int = 0


def _pair_from_tsv(line: str, line_no: int, corpus_name: str) -> SentencePair:
    columns = line.split("\t")
    if len(columns) < 2 or len(columns) > 3:
        raise FormatError(f"expected 2 or 3 tab-separated columns, got {len(columns)}")
    src = normalize(columns[0])
    tgt = normalize(columns[1])
    pair_id = columns[2].strip() if len(columns) == 3 and columns[2].strip() else f"{corpus_name}:{line_no}"
    return SentencePair(id=pair_id, source_text=src, target_text=tgt)


def _pair_from_json(obj: dict, line_no: int, corpus_name: str) -> SentencePair:
    if not isinstance(obj, dict) or "src" not in obj or "tgt" not in obj:
        raise FormatError("object must carry string fields 'src' and 'tgt'")
    src = normalize(str(obj["src"]))
    tgt = normalize(str(obj["tgt"]))
    pair_id = str(obj["id"]) if obj.get("id") else f"{corpus_name}:{line_no}"
    meta = obj.get("meta") or {}
    if not isinstance(meta, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
    ):
        raise FormatError("'meta' must be an object of strings")
    return SentencePair(id=pair_id, source_text=src, target_text=tgt, meta=meta)


def read_pairs(
    path: str | Path,
    fmt: CorpusFormat,
    stats: ReadStats | None = None,
    corpus_name: str | None = None,
) -> Iterator[SentencePair]:
    """Yield normalized pairs from path in file order.

    Pairs lacking an id get "<corpus-name>:<line-number>" (1-based). Malformed
    lines and lines that normalize to empty text are skipped and counted in
    stats.skipped, never fatal; an unreadable file is fatal.
    """
    if stats is None:
        stats = ReadStats()
    name = corpus_name or Path(path).stem
    with open(path, "r", encoding="utf-8", newline="\n") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            try:
                if fmt is CorpusFormat.TSV:
                    pair = _pair_from_tsv(line, line_no, name)
                else:
                    pair = _pair_from_json(json.loads(line), line_no, name)
            except (FormatError, ValueError) as exc:
                stats.skipped += 1
                log.warning("%s:%d: skipping malformed line: %s", path, line_no, exc)
                continue
            stats.read += 1
            yield pair


def read_scored(path: str | Path, stats: ReadStats | None = None) -> Iterator[ScoredPair]:
    """Yield scored pairs from a JSONL stream produced by a scoring stage."""
    if stats is None:
        stats = ReadStats()
    name = Path(path).stem
    with open(path, "r", encoding="utf-8", newline="\n") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            try:
                obj = json.loads(line)
                pair = _pair_from_json(obj, line_no, name)
                score = obj["score"]
                if not isinstance(score, (int, float)):
                    raise FormatError("'score' must be a number")
                scored = ScoredPair(pair=pair, similarity=float(score), scorer_id=str(obj.get("scorer", "")))
            except (FormatError, ValueError, KeyError) as exc:
                stats.skipped += 1
                log.warning("%s:%d: skipping malformed scored line: %s", path, line_no, exc)
                continue
            stats.read += 1
            yield scored


def pair_to_json_obj(pair: SentencePair, score: float | None = None, scorer: str | None = None) -> dict:
    obj: dict = {"id": pair.id, "src": pair.source_text, "tgt": pair.target_text}
    if pair.meta:
        obj["meta"] = dict(pair.meta)
    if score is not None:
        obj["score"] = score
        obj["scorer"] = scorer or ""
    return obj


def format_jsonl_line(pair: SentencePair, score: float | None = None, scorer: str | None = None) -> str:
    return json.dumps(pair_to_json_obj(pair, score, scorer), ensure_ascii=False, separators=(",", ":"))


def format_tsv_line(pair: SentencePair) -> str:
    for text in (pair.source_text, pair.target_text, pair.id):
        if "\t" in text:
            raise FormatError(f"pair {pair.id}: unencodable in TSV; use JSONL")
    return f"{pair.source_text}\t{pair.target_text}\t{pair.id}"


def write_pairs(pairs: Iterable[SentencePair], path: str | Path, fmt: CorpusFormat) -> int:
    """Write pairs to path; the output re-reads to identical pairs.

    Returns the number of records written. On failure the exception carries
    the partial-write count as its __notes__ context.
    """
    written = 0
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for pair in pairs:
                if fmt is CorpusFormat.TSV:
                    handle.write(format_tsv_line(pair) + "\n")
                else:
                    handle.write(format_jsonl_line(pair) + "\n")
                written += 1
    except OSError as exc:
        raise OSError(f"write failed after {written} records: {exc}") from exc
    return written


def write_scored(scored: Iterable[ScoredPair], path: str | Path) -> int:
    """Write scored pairs as JSONL with "score" and "scorer" fields."""
    written = 0
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for sp in scored:
                handle.write(format_jsonl_line(sp.pair, sp.similarity, sp.scorer_id) + "\n")
                written += 1
    except OSError as exc:
        raise OSError(f"write failed after {written} records: {exc}") from exc
    return written
