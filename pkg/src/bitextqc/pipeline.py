"""End-to-end filtering run: ingest -> dedup -> score -> threshold split.

Every input pair lands in exactly one of four output classes: the kept file,
the rejected file, the duplicates-removed count, or the unscored sidecar.
A JSON stats file and a run manifest (config echo, provider identity, input
digest, timings) are written alongside, and runs with the mock provider are
byte-reproducible.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .dedup import ExactDeduper
from .errors import ConfigError
from .ingest import CorpusFormat, ReadStats, format_jsonl_line, read_pairs
from .model import CorpusStats, SentencePair, SimilarityThreshold
from .similarity import (
    EmbeddingProvider,
    MockProvider,
    RemoteProvider,
    ScoreCache,
    iter_scored,
)

log = logging.getLogger(__name__)

PROVIDER_URL_ENV = "BITEXT_PROVIDER_URL"


@dataclass
class PipelineConfig:
    input_path: str
    output_kept_path: str
    output_rejected_path: str
    stats_path: str
    input_format: CorpusFormat = CorpusFormat.JSONL
    tau: float = SimilarityThreshold().tau
    provider: str = "mock"
    provider_url: str | None = None
    provider_batch: int = 64
    provider_dim: int = 256
    cache_path: str | None = None
    unscored_path: str | None = None
    manifest_path: str | None = None
    jobs: int = 1

    def __post_init__(self):
        SimilarityThreshold(self.tau)  # range check
        if self.provider not in ("mock", "remote"):
            raise ConfigError(f"provider must be mock or remote, got {self.provider!r}")
        if self.unscored_path is None:
            self.unscored_path = str(Path(self.output_kept_path).with_suffix(".unscored.jsonl"))
        if self.manifest_path is None:
            self.manifest_path = str(Path(self.stats_path).with_suffix(".manifest.json"))
        paths = [
            self.input_path,
            self.output_kept_path,
            self.output_rejected_path,
            self.stats_path,
            self.unscored_path,
            self.manifest_path,
        ]
        if len(set(paths)) != len(paths):
            raise ConfigError("pipeline paths must be distinct")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def to_json_obj(self) -> dict:
        obj = dict(self.__dict__)
        obj["input_format"] = self.input_format.value
        return obj


_CONFIG_KEYS = {
    "input_path",
    "input_format",
    "output_kept_path",
    "output_rejected_path",
    "stats_path",
    "tau",
    "provider",
    "provider_url",
    "provider_batch",
    "provider_dim",
    "cache_path",
    "unscored_path",
    "manifest_path",
    "jobs",
}


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse a key=value config file; '#' starts a comment, blanks ignored."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            values[key] = value
    return values


def build_config(values: dict) -> PipelineConfig:
    """Build PipelineConfig from string-ish key/values (file and CLI merged)."""
    converted: dict = {}
    for key, value in values.items():
        if value is None:
            continue
        if key == "input_format":
            converted[key] = CorpusFormat.parse(value) if isinstance(value, str) else value
        elif key == "tau":
            converted[key] = float(value)
        elif key in ("provider_batch", "provider_dim", "jobs"):
            converted[key] = int(value)
        else:
            converted[key] = value
    missing = {"input_path", "output_kept_path", "output_rejected_path", "stats_path"} - set(converted)
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(sorted(missing))}")
    return PipelineConfig(**converted)


def make_provider(config: PipelineConfig) -> EmbeddingProvider:
    if config.provider == "mock":
        return MockProvider(dim=config.provider_dim)
    url = config.provider_url or os.environ.get(PROVIDER_URL_ENV)
    if not url:
        raise ConfigError(
            f"remote provider needs provider_url (or the {PROVIDER_URL_ENV} environment variable)"
        )
    return RemoteProvider(url=url, dim=config.provider_dim, batch_limit=config.provider_batch)


def _digest_file(path: str | Path) -> str:
    digest = hashlib.blake2b(digest_size=16)
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_pipeline(config: PipelineConfig) -> CorpusStats:
    """Run the full filtering flow and return validated CorpusStats.

    Provider failure beyond the retry budget aborts the run: partial outputs
    are removed and the manifest records status "incomplete".
    """
    provider = make_provider(config)
    cache = ScoreCache(config.cache_path) if config.cache_path else None
    stats = CorpusStats()
    read_stats = ReadStats()
    deduper = ExactDeduper()
    tau = config.tau
    started_at = _utc_now()
    input_digest = _digest_file(config.input_path)

    manifest = {
        "tool": f"bitextqc {__version__}",
        "status": "incomplete",
        "config": config.to_json_obj(),
        "provider_id": provider.provider_id,
        "input_digest": input_digest,
        "started_at": started_at,
    }

    output_paths = (config.output_kept_path, config.output_rejected_path, config.unscored_path)
    kept_file = rejected_file = unscored_file = None
    try:
        kept_file = open(config.output_kept_path, "w", encoding="utf-8", newline="\n")
        rejected_file = open(config.output_rejected_path, "w", encoding="utf-8", newline="\n")
        unscored_file = open(config.unscored_path, "w", encoding="utf-8", newline="\n")

        def counted():
            for pair in read_pairs(config.input_path, config.input_format, stats=read_stats):
                stats.total_read += 1
                yield pair

        def on_unscored(pair: SentencePair, exc: Exception) -> None:
            stats.unscored += 1
            unscored_file.write(format_jsonl_line(pair) + "\n")

        scored = iter_scored(
            deduper.filter(counted()),
            provider,
            jobs=config.jobs,
            cache=cache,
            on_unscored=on_unscored,
        )
        for sp in scored:
            stats.scored += 1
            stats.observe_score(sp.similarity)
            line = format_jsonl_line(sp.pair, sp.similarity, sp.scorer_id) + "\n"
            if sp.similarity >= tau:
                stats.retained += 1
                kept_file.write(line)
            else:
                stats.rejected += 1
                rejected_file.write(line)
    except BaseException:
        for handle in (kept_file, rejected_file, unscored_file):
            if handle is not None:
                handle.close()
        for path in output_paths:
            if os.path.exists(path):
                os.remove(path)
        manifest["finished_at"] = _utc_now()
        with open(config.manifest_path, "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, indent=2)
        raise
    finally:
        if cache is not None:
            cache.close()

    for handle in (kept_file, rejected_file, unscored_file):
        handle.close()
    stats.duplicates_removed = deduper.removed
    stats.validate()

    with open(config.stats_path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(stats.to_json_obj(), handle, indent=2)
        handle.write("\n")
    manifest["status"] = "complete"
    manifest["finished_at"] = _utc_now()
    manifest["reader_skipped_lines"] = read_stats.skipped
    manifest["stats"] = stats.to_json_obj()
    with open(config.manifest_path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)
    if read_stats.skipped:
        log.warning("skipped %d malformed input lines", read_stats.skipped)
    return stats


def report(stats: CorpusStats) -> tuple[str, dict]:
    """Render stats as (human-readable text, JSON object); both agree on
    every number (percentages rounded to one decimal in each)."""
    obj = stats.to_json_obj()
    lines: list[str] = ["corpus filtering report", "-" * 23]
    lines.append(f"pairs read        {stats.total_read}")
    if stats.total_read > 0:
        dup_pct = round(100.0 * stats.duplicates_removed / stats.total_read, 1)
    else:
        dup_pct = 0.0
    obj["duplicates_pct"] = dup_pct
    lines.append(f"duplicates        {stats.duplicates_removed} ({dup_pct}%)")
    lines.append(f"scored            {stats.scored}")
    if stats.unscored:
        lines.append(f"unscored sidecar  {stats.unscored}")
    if stats.scored == 0:
        obj["retained_pct"] = 0.0
        obj["rejected_pct"] = 0.0
        lines.append("no pairs scored")
    else:
        retained_pct = round(100.0 * stats.retained / stats.scored, 1)
        rejected_pct = round(100.0 * stats.rejected / stats.scored, 1)
        obj["retained_pct"] = retained_pct
        obj["rejected_pct"] = rejected_pct
        lines.append(f"retained {retained_pct}% ({stats.retained})")
        lines.append(f"rejected {rejected_pct}% ({stats.rejected})")
        lines.append("")
        lines.append("score histogram (20 bins over [0,1])")
        peak = max(stats.score_histogram) or 1
        for index, count in enumerate(stats.score_histogram):
            low = index / 20
            high = (index + 1) / 20
            bar = "#" * round(40 * count / peak)
            lines.append(f"  [{low:.2f},{high:.2f}{']' if index == 19 else ')'} {count:>9} {bar}")
    return "\n".join(lines) + "\n", obj
