#!/usr/bin/env python3
"""Regenerate the frozen golden evaluation sets under tests/data/.

The texts are synthetic English-like segments: each reference is drawn from
a fixed vocabulary and the hypothesis is a noisy copy (substitutions,
deletions, insertions, occasional adjacent swaps). Everything is seeded, so
this script always reproduces the committed files byte for byte.

Expected metric values for these sets live in tests/data/golden_expected.json
and are produced once by scripts/compute_golden_values.py; regenerate both
together if you ever change the seed or the noise model.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

SEED = 20240817

VOCAB = """
the a this that every some any one two three new old small large good bad
quick slow bright dark early late young local public main only other first
house river market school garden station window bridge valley harbor temple
farmer teacher doctor driver singer writer painter soldier merchant child
walks runs reads writes builds opens closes carries brings finds keeps sells
buys holds meets leads follows watches paints cleans repairs visits crosses
near under over behind beside within without toward against between around
today tomorrow quietly quickly slowly carefully together alone again still
morning evening summer winter harvest festival journey letter basket lantern
""".split()


def make_items(rng: random.Random, count: int) -> list[dict]:
    items = []
    for _ in range(count):
        length = rng.randint(6, 18)
        ref = [rng.choice(VOCAB) for _ in range(length)]
        hyp = []
        for token in ref:
            roll = rng.random()
            if roll < 0.08:
                continue  # deletion
            if roll < 0.23:
                hyp.append(rng.choice(VOCAB))  # substitution
            else:
                hyp.append(token)
            if rng.random() < 0.06:
                hyp.append(rng.choice(VOCAB))  # insertion
        if rng.random() < 0.10 and len(hyp) >= 2:
            k = rng.randrange(len(hyp) - 1)
            hyp[k], hyp[k + 1] = hyp[k + 1], hyp[k]
        while len(hyp) < 3:
            hyp.append(rng.choice(VOCAB))
        items.append({"hyp": " ".join(hyp), "ref": " ".join(ref)})
    return items


def main() -> None:
    data_dir = Path(__file__).resolve().parent.parent / "tests" / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    for name, count in (("golden100.jsonl", 100), ("golden5.jsonl", 5)):
        items = make_items(rng, count)
        with open(data_dir / name, "w", encoding="utf-8", newline="\n") as handle:
            for item in items:
                handle.write(json.dumps(item, ensure_ascii=False, separators=(",", ":")) + "\n")
        print(f"wrote {data_dir / name} ({count} items)")


if __name__ == "__main__":
    main()
