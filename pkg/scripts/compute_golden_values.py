#!/usr/bin/env python3
"""Compute reference-implementation metric values for the frozen golden sets.

Requires the `sacrebleu` package (pip install sacrebleu). Values are written
to tests/data/golden_expected.json and committed; the test suite checks this
package's own implementations against them within 0.1 absolute, so this
script is only ever re-run when the golden sets themselves change.

Conventions pinned here (and documented in the README):
  BLEU   corpus-level, whitespace tokenization (tokenize="none" on already
         normalized text), floor smoothing 0.1 == this package's add-epsilon.
  chrF   sentence chrF (char orders 1..6, beta 2), macro-averaged over
         segments, which matches this package's segment-mean aggregation.
  chrF++ as chrF plus word 1- and 2-grams (word_order=2).
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import sacrebleu
from sacrebleu.metrics import CHRF

DATA_DIR = Path(__file__).resolve().parent.parent / "tests" / "data"


def load(name: str) -> tuple[list[str], list[str]]:
    hyps, refs = [], []
    with open(DATA_DIR / name, "r", encoding="utf-8") as handle:
        for line in handle:
            obj = json.loads(line)
            hyps.append(obj["hyp"])
            refs.append(obj["ref"])
    return hyps, refs


def corpus_values(hyps: list[str], refs: list[str]) -> dict:
    bleu = sacrebleu.corpus_bleu(
        hyps, [refs], smooth_method="floor", smooth_value=0.1, force=True, tokenize="none"
    ).score
    chrf_metric = CHRF(word_order=0)
    chrfpp_metric = CHRF(word_order=2)
    chrf_macro = math.fsum(
        chrf_metric.sentence_score(h, [r]).score for h, r in zip(hyps, refs)
    ) / len(hyps)
    chrfpp_macro = math.fsum(
        chrfpp_metric.sentence_score(h, [r]).score for h, r in zip(hyps, refs)
    ) / len(hyps)
    return {"bleu": bleu, "chrf": chrf_macro, "chrf_pp": chrfpp_macro}


def main() -> None:
    out = {
        "oracle": f"sacrebleu {sacrebleu.__version__}",
        "golden100": corpus_values(*load("golden100.jsonl")),
        "golden5": corpus_values(*load("golden5.jsonl")),
        "spot": {
            "bleu_cat": corpus_values(
                ["the cat sat on the mat"], ["the cat is on the mat"]
            )["bleu"],
            "chrf_abcd": corpus_values(["abcd"], ["abce"])["chrf"],
            "chrfpp_cat": corpus_values(["the cat sat"], ["the cat sits"])["chrf_pp"],
        },
    }
    path = DATA_DIR / "golden_expected.json"
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(out, handle, indent=2)
        handle.write("\n")
    print(f"wrote {path}")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
