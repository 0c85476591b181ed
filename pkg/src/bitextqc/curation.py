"""Gold-testset curation: sampling, review queue, decision log, export.

The append-only JSONL decision log is the source of truth: replaying any
prefix of it over the persisted queue reconstructs the review state exactly,
so the service survives being killed mid-session. Leases are deliberately
ephemeral (in-memory only) and expire on their own.
"""
from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import BitextError, ConflictError, FormatError, UnknownPairError
from .ingest import CorpusFormat, normalize
from .model import DiscrepancyLabel

log = logging.getLogger(__name__)

LEASE_SECONDS = 600.0
QUEUE_FILE = "queue.jsonl"
DECISIONS_FILE = "decisions.jsonl"

# per_label bucket for reject/flag decisions that carry no label, so label
# counts always partition the decision total
UNLABELED = "Unspecified"


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    FLAG = "flag"


@dataclass(frozen=True)
class Decision:
    """One reviewer verdict; immutable once recorded."""

    pair_id: str
    verdict: Verdict
    reviewer: str
    timestamp: str
    label: DiscrepancyLabel | None = None
    note: str | None = None

    def __post_init__(self):
        if not self.pair_id or not self.reviewer:
            raise ValueError("decision needs a pair_id and a reviewer")
        if self.verdict is Verdict.ACCEPT and self.label not in (None, DiscrepancyLabel.ACCURATE):
            raise ValueError("an accepted pair may only be labeled Accurate")

    def to_json_obj(self) -> dict:
        obj: dict = {
            "pair_id": self.pair_id,
            "verdict": self.verdict.value,
            "reviewer": self.reviewer,
            "ts": self.timestamp,
        }
        if self.label is not None:
            obj["label"] = self.label.value
        if self.note:
            obj["note"] = self.note
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Decision":
        return cls(
            pair_id=str(obj["pair_id"]),
            verdict=Verdict(obj["verdict"]),
            reviewer=str(obj["reviewer"]),
            timestamp=str(obj.get("ts", "")),
            label=DiscrepancyLabel(obj["label"]) if obj.get("label") else None,
            note=obj.get("note") or None,
        )

    def effective_label(self) -> str:
        """Label bucket for statistics; unlabeled accepts count as Accurate."""
        if self.label is not None:
            return self.label.value
        if self.verdict is Verdict.ACCEPT:
            return DiscrepancyLabel.ACCURATE.value
        return UNLABELED


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def sample_candidates(
    corpus_path: str | Path,
    fmt: CorpusFormat,
    n: int,
    seed: int,
    state_dir: str | Path,
) -> "CurationStore":
    """Draw a uniform sample of n pairs without replacement (reservoir,
    reproducible from seed), persist it as the review queue, and open a store.

    Scored JSONL inputs keep their "score" field on the queue records.
    """
    records = list(_iter_queue_records(corpus_path, fmt))
    if n > len(records):
        raise ValueError(f"cannot sample {n} pairs from a corpus of {len(records)}")
    seen = {r["pair_id"] for r in records}
    if len(seen) != len(records):
        raise ValueError("corpus contains duplicate pair ids; dedup before sampling")
    rng = random.Random(seed)
    reservoir: list[dict] = []
    for index, record in enumerate(records):
        if index < n:
            reservoir.append(record)
        else:
            j = rng.randrange(index + 1)
            if j < n:
                reservoir[j] = record
    state = Path(state_dir)
    state.mkdir(parents=True, exist_ok=True)
    queue_path = state / QUEUE_FILE
    if queue_path.exists():
        raise BitextError(f"refusing to overwrite existing queue at {queue_path}")
    with open(queue_path, "w", encoding="utf-8", newline="\n") as handle:
        for record in reservoir:
            handle.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")
    return CurationStore(state_dir)


def _iter_queue_records(corpus_path: str | Path, fmt: CorpusFormat) -> Iterator[dict]:
    name = Path(corpus_path).stem
    with open(corpus_path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            try:
                if fmt is CorpusFormat.TSV:
                    columns = line.split("\t")
                    if len(columns) < 2:
                        raise FormatError("need at least source and target columns")
                    record = {
                        "pair_id": columns[2] if len(columns) > 2 and columns[2] else f"{name}:{line_no}",
                        "src": normalize(columns[0]),
                        "tgt": normalize(columns[1]),
                    }
                else:
                    obj = json.loads(line)
                    record = {
                        "pair_id": str(obj.get("id") or f"{name}:{line_no}"),
                        "src": normalize(str(obj["src"])),
                        "tgt": normalize(str(obj["tgt"])),
                    }
                    if isinstance(obj.get("score"), (int, float)):
                        record["score"] = float(obj["score"])
                if not record["src"] or not record["tgt"]:
                    raise FormatError("empty side")
            except (FormatError, ValueError, KeyError) as exc:
                log.warning("%s:%d: skipping malformed line: %s", corpus_path, line_no, exc)
                continue
            yield record


class CurationStore:
    """Review queue plus append-only decision log under one state directory.

    All mutations are serialized through a single lock; reads take the same
    lock briefly to snapshot. Log appends are flushed and fsynced per record
    so a killed process never loses an acknowledged decision.
    """

    def __init__(self, state_dir: str | Path, lease_seconds: float = LEASE_SECONDS):
        self.state_dir = Path(state_dir)
        self.lease_seconds = lease_seconds
        self._lock = threading.Lock()
        self._order: list[str] = []
        self._records: dict[str, dict] = {}
        self._decided: dict[str, Decision] = {}
        self._decision_order: list[str] = []
        self._leases: dict[str, tuple[str, float]] = {}

        queue_path = self.state_dir / QUEUE_FILE
        if not queue_path.exists():
            raise BitextError(f"no review queue at {queue_path}; run sample first")
        with open(queue_path, "r", encoding="utf-8") as handle:
            for raw in handle:
                line = raw.strip()
                if not line:
                    continue
                record = json.loads(line)
                pair_id = record["pair_id"]
                self._order.append(pair_id)
                self._records[pair_id] = record

        log_path = self.state_dir / DECISIONS_FILE
        if log_path.exists():
            with open(log_path, "r", encoding="utf-8") as handle:
                for line_no, raw in enumerate(handle, start=1):
                    line = raw.strip()
                    if not line:
                        continue
                    decision = Decision.from_json_obj(json.loads(line))
                    if decision.pair_id not in self._records:
                        log.warning("%s:%d: decision for unknown pair %s ignored",
                                    log_path, line_no, decision.pair_id)
                        continue
                    if decision.pair_id in self._decided:
                        log.warning("%s:%d: duplicate decision for %s ignored (first wins)",
                                    log_path, line_no, decision.pair_id)
                        continue
                    self._decided[decision.pair_id] = decision
                    self._decision_order.append(decision.pair_id)
        self._log_handle = open(log_path, "a", encoding="utf-8", newline="\n")

    def close(self) -> None:
        self._log_handle.close()

    def __len__(self) -> int:
        return len(self._order)

    def _active_leases(self, now: float) -> dict[str, tuple[str, float]]:
        return {
            pair_id: lease
            for pair_id, lease in self._leases.items()
            if lease[1] > now and pair_id not in self._decided
        }

    def next_pending(self, reviewer: str, now: float | None = None) -> tuple[dict, str] | None:
        """Lease the lowest-index available pair to reviewer.

        Returns (queue record, lease expiry ISO timestamp) or None when no
        work remains. A reviewer asking again before deciding gets their own
        leased pair back with the lease renewed.
        """
        if not reviewer:
            raise ValueError("reviewer id must be non-empty")
        clock = time.time() if now is None else now
        with self._lock:
            active = self._active_leases(clock)
            self._leases = dict(active)
            for pair_id, (holder, _) in active.items():
                if holder == reviewer:
                    return self._lease(pair_id, reviewer, clock)
            for pair_id in self._order:
                if pair_id in self._decided or pair_id in self._leases:
                    continue
                return self._lease(pair_id, reviewer, clock)
            return None

    def _lease(self, pair_id: str, reviewer: str, clock: float) -> tuple[dict, str]:
        expiry = clock + self.lease_seconds
        self._leases[pair_id] = (reviewer, expiry)
        expiry_iso = datetime.fromtimestamp(expiry, tz=timezone.utc).isoformat(timespec="seconds")
        return dict(self._records[pair_id]), expiry_iso

    def record_decision(self, decision: Decision, now: float | None = None) -> None:
        """Append the decision to the log and mark the pair decided.

        Raises UnknownPairError for ids outside the queue and ConflictError
        when the pair is already decided or actively leased by someone else.
        """
        clock = time.time() if now is None else now
        with self._lock:
            if decision.pair_id not in self._records:
                raise UnknownPairError(f"unknown pair id {decision.pair_id!r}")
            if decision.pair_id in self._decided:
                raise ConflictError(f"pair {decision.pair_id} is already decided")
            lease = self._leases.get(decision.pair_id)
            if lease is not None and lease[1] > clock and lease[0] != decision.reviewer:
                raise ConflictError(f"pair {decision.pair_id} is leased by another reviewer")
            line = json.dumps(decision.to_json_obj(), ensure_ascii=False, separators=(",", ":"))
            self._log_handle.write(line + "\n")
            self._log_handle.flush()
            os.fsync(self._log_handle.fileno())
            self._decided[decision.pair_id] = decision
            self._decision_order.append(decision.pair_id)
            self._leases.pop(decision.pair_id, None)

    def stats(self, now: float | None = None) -> dict:
        clock = time.time() if now is None else now
        with self._lock:
            active = self._active_leases(clock)
            decided = list(self._decided.values())
            per_label = Counter(d.effective_label() for d in decided)
            accurate = per_label.get(DiscrepancyLabel.ACCURATE.value, 0)
            defect_rate = (len(decided) - accurate) / len(decided) if decided else 0.0
            return {
                "pending": len(self._order) - len(self._decided) - len(active),
                "leased": len(active),
                "decided": len(decided),
                "per_label": dict(sorted(per_label.items())),
                "defect_rate": defect_rate,
            }

    def decisions(self) -> list[Decision]:
        with self._lock:
            return [self._decided[pair_id] for pair_id in self._decision_order]

    def export_gold(self, limit: int | None = None, order: str = "decision") -> list[dict]:
        """Accepted pairs as queue records, oldest decision first (or by
        similarity score descending with order="score"), truncated to limit."""
        if order not in ("decision", "score"):
            raise ValueError(f"order must be 'decision' or 'score', got {order!r}")
        with self._lock:
            accepted = [
                self._records[pair_id]
                for pair_id in self._decision_order
                if self._decided[pair_id].verdict is Verdict.ACCEPT
            ]
        if not accepted:
            raise BitextError("empty gold set: no accepted pairs")
        if order == "score":
            accepted.sort(key=lambda record: -record.get("score", 0.0))
        if limit is not None:
            accepted = accepted[:limit]
        return [dict(record) for record in accepted]


def assessment_stats(decisions: Iterable[Decision]) -> dict:
    """Per-label counts and defect rate over a decision log.

    defect_rate is the fraction of decisions whose effective label is not
    Accurate; label counts partition the total exactly.
    """
    per_label: Counter = Counter()
    total = 0
    for decision in decisions:
        per_label[decision.effective_label()] += 1
        total += 1
    if total == 0:
        raise ValueError("empty decision log")
    accurate = per_label.get(DiscrepancyLabel.ACCURATE.value, 0)
    return {
        "total": total,
        "per_label": dict(sorted(per_label.items())),
        "defect_rate": (total - accurate) / total,
    }


def read_decision_log(path: str | Path) -> list[Decision]:
    decisions = []
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            line = raw.strip()
            if line:
                decisions.append(Decision.from_json_obj(json.loads(line)))
    return decisions
