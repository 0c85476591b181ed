"""Command-line entry point: one subcommand per pipeline stage plus the
review service. Logs go to stderr; data goes to files or stdout. Exit codes:
0 success, 1 user error, 2 internal or provider error."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

from . import __version__
from .curation import CurationStore, read_decision_log, sample_candidates
from .dedup import ExactDeduper
from .errors import BitextError, ProviderError
from .ingest import (
    CorpusFormat,
    ReadStats,
    format_jsonl_line,
    read_pairs,
    read_scored,
    write_pairs,
)
from .metrics import EvalSet, evaluate
from .model import CorpusStats, SimilarityThreshold
from .pipeline import (
    PROVIDER_URL_ENV,
    build_config,
    load_config_file,
    report,
    run_pipeline,
)
from .similarity import MockProvider, RemoteProvider, ScoreCache, iter_scored

log = logging.getLogger("bitextqc")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage by default; the contract is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _fmt(value: str | None, path: str) -> CorpusFormat:
    return CorpusFormat.parse(value) if value else CorpusFormat.guess(path)


def _provider_from_args(args) -> MockProvider | RemoteProvider:
    if args.provider == "mock":
        return MockProvider(dim=args.dim)
    url = args.url or os.environ.get(PROVIDER_URL_ENV)
    if not url:
        raise BitextError(
            f"remote provider needs --url or the {PROVIDER_URL_ENV} environment variable"
        )
    return RemoteProvider(url=url, dim=args.dim, batch_limit=args.batch)


def _add_provider_flags(parser, default_dim=256):
    parser.add_argument("--provider", choices=("mock", "remote"), default="mock")
    parser.add_argument("--url", help="remote provider endpoint")
    parser.add_argument("--dim", type=int, default=default_dim, help="embedding dimension")
    parser.add_argument("--batch", type=int, default=64, help="remote batch size")


def cmd_dedup(args) -> int:
    fmt_in = _fmt(args.format, args.input)
    fmt_out = _fmt(args.out_format, args.out) if (args.out_format or args.out) else fmt_in
    stats = ReadStats()
    deduper = ExactDeduper()
    written = write_pairs(deduper.filter(read_pairs(args.input, fmt_in, stats=stats)), args.out, fmt_out)
    log.info("read %d pairs (%d malformed lines skipped), removed %d duplicates, wrote %d",
             stats.read, stats.skipped, deduper.removed, written)
    return 0


def cmd_score(args) -> int:
    fmt_in = _fmt(args.format, args.input)
    provider = _provider_from_args(args)
    cache = ScoreCache(args.cache) if args.cache else None
    unscored_path = args.unscored or str(Path(args.out).with_suffix(".unscored.jsonl"))
    stats = ReadStats()
    written = unscored = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as out, open(
        unscored_path, "w", encoding="utf-8", newline="\n"
    ) as sidecar:

        def on_unscored(pair, exc):
            nonlocal unscored
            unscored += 1
            sidecar.write(format_jsonl_line(pair) + "\n")

        for sp in iter_scored(
            read_pairs(args.input, fmt_in, stats=stats),
            provider,
            jobs=args.jobs,
            cache=cache,
            on_unscored=on_unscored,
        ):
            out.write(format_jsonl_line(sp.pair, sp.similarity, sp.scorer_id) + "\n")
            written += 1
    if cache is not None:
        cache.close()
    log.info("scored %d pairs (%d unscored, %d malformed lines skipped)",
             written, unscored, stats.skipped)
    return 0


def cmd_filter(args) -> int:
    tau = SimilarityThreshold(args.tau).tau
    kept = rejected = 0
    with open(args.kept, "w", encoding="utf-8", newline="\n") as kept_file, open(
        args.rejected, "w", encoding="utf-8", newline="\n"
    ) as rejected_file:
        for sp in read_scored(args.input):
            line = format_jsonl_line(sp.pair, sp.similarity, sp.scorer_id) + "\n"
            if sp.similarity >= tau:
                kept_file.write(line)
                kept += 1
            else:
                rejected_file.write(line)
                rejected += 1
    log.info("kept %d, rejected %d at tau=%s", kept, rejected, tau)
    return 0


def cmd_run(args) -> int:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    overrides = {
        "input_path": args.input,
        "input_format": args.format,
        "output_kept_path": args.kept,
        "output_rejected_path": args.rejected,
        "stats_path": args.stats,
        "tau": args.tau,
        "provider": args.provider,
        "provider_url": args.url,
        "provider_batch": args.batch,
        "provider_dim": args.dim,
        "cache_path": args.cache,
        "unscored_path": args.unscored,
        "manifest_path": args.manifest,
        "jobs": args.jobs,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = build_config(values)
    stats = run_pipeline(config)
    text, _ = report(stats)
    print(text, file=sys.stderr, end="")
    return 0


def cmd_evaluate(args) -> int:
    eval_set = EvalSet.from_jsonl(args.set)
    provider = _provider_from_args(args)
    result = evaluate(eval_set, provider)
    print(json.dumps(result.to_json_obj(), indent=2))
    return 0


def cmd_sample(args) -> int:
    fmt = _fmt(args.format, args.corpus)
    store = sample_candidates(args.corpus, fmt, args.n, args.seed, args.state_dir)
    log.info("sampled %d pairs into %s", len(store), args.state_dir)
    store.close()
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store = CurationStore(args.state_dir, lease_seconds=args.lease_seconds)
    ui_dir = args.ui_dir or os.environ.get("BITEXTQC_UI_DIR")
    app = create_app(store, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export_gold(args) -> int:
    store = CurationStore(args.state_dir)
    try:
        records = store.export_gold(limit=args.limit, order=args.order)
    finally:
        store.close()
    out = open(args.out, "w", encoding="utf-8", newline="\n") if args.out else sys.stdout
    try:
        for record in records:
            obj = {"id": record["pair_id"], "src": record["src"], "tgt": record["tgt"]}
            if "score" in record:
                obj["score"] = record["score"]
            out.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    log.info("exported %d gold pairs", len(records))
    return 0


def cmd_report(args) -> int:
    with open(args.stats, "r", encoding="utf-8") as handle:
        stats = CorpusStats.from_json_obj(json.load(handle))
    text, obj = report(stats)
    if args.json:
        print(json.dumps(obj, indent=2))
    else:
        print(text, end="")
    return 0


def cmd_assess(args) -> int:
    from .curation import assessment_stats

    decisions = read_decision_log(args.log)
    print(json.dumps(assessment_stats(decisions), indent=2))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="bitextqc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"bitextqc {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dedup", help="remove exact-duplicate pairs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("tsv", "jsonl"))
    p.add_argument("--out", required=True)
    p.add_argument("--out-format", choices=("tsv", "jsonl"))
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("score", help="attach similarity scores to pairs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("tsv", "jsonl"))
    p.add_argument("--out", required=True, help="scored JSONL output")
    p.add_argument("--unscored", help="sidecar for pairs that fail scoring")
    p.add_argument("--cache", help="sqlite score cache path")
    p.add_argument("--jobs", type=int, default=1, help="concurrent scoring batches")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("filter", help="split a scored stream at a threshold")
    p.add_argument("--in", dest="input", required=True, help="scored JSONL input")
    p.add_argument("--tau", type=float, default=SimilarityThreshold().tau)
    p.add_argument("--kept", required=True)
    p.add_argument("--rejected", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("run", help="full pipeline: dedup, score, filter, stats")
    p.add_argument("--config", help="key=value config file; flags override")
    p.add_argument("--in", dest="input")
    p.add_argument("--format", dest="format", choices=("tsv", "jsonl"))
    p.add_argument("--kept")
    p.add_argument("--rejected")
    p.add_argument("--stats")
    p.add_argument("--tau", type=float)
    p.add_argument("--cache")
    p.add_argument("--unscored")
    p.add_argument("--manifest")
    p.add_argument("--jobs", type=int)
    p.add_argument("--provider", choices=("mock", "remote"))
    p.add_argument("--url")
    p.add_argument("--dim", type=int)
    p.add_argument("--batch", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="five-metric report for a hyp/ref set")
    p.add_argument("--set", required=True, help="JSONL with hyp/ref (or src/tgt) fields")
    _add_provider_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sample", help="draw a seeded review queue from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("tsv", "jsonl"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--state-dir", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--state-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8137)
    p.add_argument("--ui-dir", help="static UI bundle directory")
    p.add_argument("--lease-seconds", type=float, default=600.0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-gold", help="export accepted pairs as an eval set")
    p.add_argument("--state-dir", required=True)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--limit", type=int)
    p.add_argument("--order", choices=("decision", "score"), default="decision")
    p.set_defaults(func=cmd_export_gold)

    p = sub.add_parser("report", help="render a stats JSON file")
    p.add_argument("--stats", required=True)
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("assess", help="per-label counts and defect rate from a decision log")
    p.add_argument("--log", required=True, help="decisions.jsonl path")
    p.set_defaults(func=cmd_assess)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ProviderError as exc:
        log.error("provider error: %s", exc)
        return 2
    except (BitextError, OSError, ValueError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
