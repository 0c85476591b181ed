"""Shared test helpers: corpus builders and synthetic data generators."""
from __future__ import annotations

import json
import random
import string
from pathlib import Path

from hypothesis import settings

from bitextqc.model import SentencePair

settings.register_profile("suite", deadline=None, max_examples=200)
settings.load_profile("suite")

DATA_DIR = Path(__file__).parent / "data"


def make_pair(src: str, tgt: str, pid: str = "p") -> SentencePair:
    return SentencePair(id=pid, source_text=src, target_text=tgt)


def write_tsv(path: Path, rows: list[tuple]) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write("\t".join(str(col) for col in row) + "\n")
    return path


def write_jsonl(path: Path, objs: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for obj in objs:
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path


def random_sentence(rng: random.Random, n_words: tuple[int, int] = (4, 12)) -> str:
    words = [
        "".join(rng.choices(string.ascii_lowercase, k=rng.randint(3, 9)))
        for _ in range(rng.randint(*n_words))
    ]
    return " ".join(words)


def gen_corpus_tsv(path: Path, n: int, seed: int, dup_fraction: float = 0.1) -> Path:
    """Synthetic TSV corpus with unique pairs plus injected exact duplicates."""
    rng = random.Random(seed)
    rows: list[tuple[str, str]] = []
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for i in range(n):
            if rows and rng.random() < dup_fraction:
                src, tgt = rows[rng.randrange(len(rows))]
            else:
                src = random_sentence(rng)
                tgt = f"{random_sentence(rng)} {i}"
                rows.append((src, tgt))
            handle.write(f"{src}\t{tgt}\n")
    return path
