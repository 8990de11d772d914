"""``aop`` command-line entry point.

Exit codes: 0 ok, 1 systemic failure, 2 usage or input error, 3 refusing to
overwrite, 4 backend failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .agent.loop import dump_trace, run
from .backends.asr import FileTranscriptProvider
from .bench.dataset import load_dataset, load_predictions, write_jsonl
from .bench.evaluate import run_eval
from .bench.report import dataset_stats, score
from .config import RunConfig, load_config, make_backends
from .errors import (
    AOPError,
    BackendError,
    ConfigError,
    DatasetError,
    IngestionError,
    ManifestError,
    MemoryBuildError,
    PreconditionError,
    ScoringError,
)
from .memory.builder import build_memory
from .memory.storage import MANIFEST_NAME, load_memory, store_memory
from .retrieval.tools import MAX_RADIUS, TOOLS, ObservationTools

EXIT_OK, EXIT_SYSTEMIC, EXIT_USAGE, EXIT_CLOBBER, EXIT_BACKEND = 0, 1, 2, 3, 4

log = logging.getLogger("aopagent.cli")


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"aop: error: {msg}", file=sys.stderr)


def _overrides(args: argparse.Namespace) -> dict:
    """Collect flags that map onto config keys; unset flags are left out."""
    mapping = {
        "base_url": ("backend", "base_url"),
        "model": ("backend", "model_name"),
        "timeout": ("backend", "timeout_s"),
        "max_retries": ("backend", "max_retries"),
        "context_budget": ("backend", "context_budget_tokens"),
        "provider": ("provider", "provider"),
        "embedder": ("provider", "embedder"),
        "embedding_dim": ("provider", "embedding_dim"),
        "seed": ("provider", "seed"),
        "merge_threshold": ("segmentation", "merge_threshold_s"),
        "max_duration": ("segmentation", "max_duration_s"),
        "overlap": ("segmentation", "overlap_s"),
        "gap_threshold": ("segmentation", "gap_fill_threshold_s"),
        "no_speech_window": ("segmentation", "no_speech_window_s"),
        "max_rounds": ("loop", "max_rounds"),
        "top_m": ("loop", "evidence_top_m_for_reasoner"),
        "k": ("loop", "default_k"),
        "lam_default": ("loop", "default_lambda"),
        "evidence_mode": ("loop", "evidence_mode"),
        "build_workers": ("build", "workers"),
        "workers": ("eval", "workers"),
        "mode": ("eval", "mode"),
    }
    out: dict = {}
    for attr, (section, key) in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out.setdefault(section, {})[key] = value
    return out


def _config(args: argparse.Namespace) -> RunConfig:
    return load_config(args.config, _overrides(args))


# -- commands -------------------------------------------------------------------


def cmd_build_memory(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out = Path(args.out)
    if (out / MANIFEST_NAME).exists() and not args.force:
        _err(f"{out / MANIFEST_NAME} already exists; pass --force to overwrite")
        return EXIT_CLOBBER
    try:
        utterances = FileTranscriptProvider().transcribe(args.transcript)
    except IngestionError as exc:
        _err(str(exc))
        return EXIT_USAGE
    backends = make_backends(cfg)
    try:
        memory = build_memory(
            args.video_id or out.name,
            args.duration,
            utterances,
            backends,
            cfg.segmentation,
            workers=cfg.build.workers,
            media_refs=args.media_template,
            media_root=out,
            context_budget_tokens=cfg.backend.context_budget_tokens,
            temperature=cfg.build.temperature,
            prompts_dir=args.prompts_dir,
        )
    except MemoryBuildError as exc:
        _err(f"stage {exc.stage}: {exc.cause} ({len(exc.annotated)} segment(s) annotated)")
        return EXIT_BACKEND if isinstance(exc.cause, (BackendError, AOPError)) else EXIT_SYSTEMIC
    manifest = store_memory(memory, out)
    print(f"built {memory.video_id}: N_fine={memory.n_fine} N_mid={memory.n_mid} -> {manifest}")
    return EXIT_OK


def cmd_query(args: argparse.Namespace) -> int:
    cfg = _config(args)
    memory = load_memory(args.memory)
    tools = ObservationTools(memory, make_backends(cfg).embed)
    tool = args.tool
    if tool in ("description", "keyword", "keypoint") and not args.query:
        raise UsageError(f"--query is required for the {tool} tool")
    if tool in ("neighbor", "fine"):
        if args.anchor is None:
            raise UsageError(f"--anchor is required for the {tool} tool")
        if not 1 <= args.anchor <= memory.n_mid:
            raise UsageError(f"--anchor {args.anchor} outside 1..{memory.n_mid}")
    k = args.top_k or cfg.loop.default_k
    try:
        if tool == "fine":
            clips = tools.fine_grained(args.anchor)
            rows = [
                {"index": c.index, "start": c.start, "end": c.end, "is_gap": c.is_gap, "text": c.text}
                for c in clips
            ]
            if args.json:
                print(json.dumps(rows, ensure_ascii=False, indent=1))
            else:
                for r in rows:
                    tag = " (gap)" if r["is_gap"] else ""
                    print(f"{r['index']:>5}  {r['start']:8.2f}-{r['end']:8.2f}s{tag}  {r['text']}")
            return EXIT_OK
        if tool == "description":
            found = tools.desc_search(args.query, k)
        elif tool == "keyword":
            found = tools.keyword_search(args.query, k)
        elif tool == "keypoint":
            lam = cfg.loop.default_lambda if args.lam is None else args.lam
            found = tools.keypoint_search(args.query, lam, k)
        else:
            found = tools.neighbor(args.anchor, args.radius or 1)
    except PreconditionError as exc:
        raise UsageError(str(exc)) from exc
    if args.json:
        print(json.dumps([s.to_dict() for s in found], ensure_ascii=False, indent=1))
        return EXIT_OK
    print(f"{'rank':>4}  {'segment':>7}  {'score':>10}  evidence")
    for rank, s in enumerate(found, 1):
        seg = memory.segment(s.segment_index)
        evidence = " | ".join(s.matched_evidence)
        print(f"{rank:>4}  {s.segment_index:>7}  {s.score:10.6f}  [{seg.start:.1f}-{seg.end:.1f}s] {evidence}")
    return EXIT_OK


def _parse_options(raw: list[str]) -> list[tuple[str, str]]:
    out = []
    for i, item in enumerate(raw):
        for sep in ("=", ".", ":", ")"):
            head, found, tail = item.partition(sep)
            if found and len(head.strip()) == 1 and head.strip().isalpha():
                out.append((head.strip().upper(), tail.strip()))
                break
        else:
            out.append((chr(ord("A") + i), item.strip()))
    return out


def cmd_answer(args: argparse.Namespace) -> int:
    cfg = _config(args)
    memory = load_memory(args.memory)
    backends = make_backends(cfg)
    options = _parse_options(args.option or [])
    result = run(
        args.question,
        memory,
        cfg.loop,
        chat=backends.chat,
        embedder=backends.embed,
        options=options,
        media_root=args.memory,
        prompts_dir=args.prompts_dir,
    )
    trace_path = Path(args.trace) if args.trace else Path(args.memory) / "traces" / "answer.json"
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    trace_path.write_text(dump_trace(result.trace), encoding="utf-8")
    if result.error:
        _err(f"backend failure: {result.error}")
        print(f"trace: {trace_path}")
        return EXIT_BACKEND
    print(f"ANSWER: {result.extracted_option}" if result.extracted_option else "UNANSWERED")
    print(f"rounds_used: {result.rounds_used}")
    print(f"trace: {trace_path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dataset = load_dataset(args.dataset)
    if not dataset:
        _err(f"dataset {args.dataset} is empty")
        return EXIT_USAGE
    backends = make_backends(cfg)
    out = Path(args.out or cfg.eval.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    preds = run_eval(
        dataset,
        args.memory_root,
        cfg.eval.mode,
        cfg.eval.workers,
        chat=backends.chat,
        embedder=backends.embed,
        config=cfg.loop,
        trace_dir=out / "traces",
        prompts_dir=args.prompts_dir,
    )
    write_jsonl(out / "predictions.jsonl", preds)
    report = score(dataset, preds)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True), encoding="utf-8")
    (out / "report.txt").write_text(report.to_table() + "\n", encoding="utf-8")
    print(report.to_table())
    failures = [p for p in preds if p.error]
    if failures:
        print(f"\nfailures ({len(failures)}):")
        for p in failures:
            print(f"  {p.id}: {p.error}")
    if len(failures) == len(preds):
        _err("every question failed")
        return EXIT_SYSTEMIC
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    report = score(dataset, load_predictions(args.predictions))
    if args.json:
        print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    else:
        print(report.to_table())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True), encoding="utf-8")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    if not dataset:
        _err(f"dataset {args.dataset} is empty")
        return EXIT_USAGE
    print(json.dumps(dataset_stats(dataset), indent=1))
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    if args.memory is None:
        print(json.dumps(_config(args).to_dict(), indent=1, sort_keys=True))
        return EXIT_OK
    memory = load_memory(args.memory)
    summary = {
        "video_id": memory.video_id,
        "duration": memory.duration,
        "n_mid": memory.n_mid,
        "n_fine": memory.n_fine,
        "n_gap_clips": sum(c.is_gap for c in memory.fine_clips),
        "embedding_dim": memory.embedding_dim,
        "build_config": {
            "merge_threshold_s": memory.build_config.merge_threshold_s,
            "max_duration_s": memory.build_config.max_duration_s,
            "overlap_s": memory.build_config.overlap_s,
        },
        "global_description": memory.global_description,
        "segments": [
            {"index": s.index, "start": s.start, "end": s.end, "fine_clips": list(s.fine_clip_indices)}
            for s in memory.mid_segments
        ],
    }
    print(json.dumps(summary, indent=1, ensure_ascii=False))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="YAML or JSON run configuration file")
    g.add_argument("--provider", choices=("openai", "heuristic"), default=None)
    g.add_argument("--embedder", choices=("remote", "bow", "hash"), default=None)
    g.add_argument("--embedding-dim", type=int, default=None)
    g.add_argument("--seed", type=int, default=None, help="seed for the hash embedder")
    g.add_argument("--base-url", default=None)
    g.add_argument("--model", default=None)
    g.add_argument("--timeout", type=float, default=None)
    g.add_argument("--max-retries", type=int, default=None)
    g.add_argument("--context-budget", type=int, default=None)
    g.add_argument("--max-rounds", type=int, default=None)
    g.add_argument("--top-m", type=int, default=None)
    g.add_argument("--default-k", dest="k", type=int, default=None)
    g.add_argument("--default-lambda", dest="lam_default", type=float, default=None)
    g.add_argument("--evidence-mode", choices=("text_only", "media_attach"), default=None)
    g.add_argument("--prompts-dir", default=None, help="directory of prompt overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aop", description="Active omni-modal perception over long videos")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-memory", help="build a hierarchical memory from an ASR transcript")
    p.add_argument("--transcript", required=True, help="JSON array of {start, end, text}")
    p.add_argument("--duration", type=float, required=True, help="video duration in seconds")
    p.add_argument("--out", required=True, help="memory directory")
    p.add_argument("--video-id", default=None)
    p.add_argument("--media-template", default=None, help='e.g. "media/seg_{index:04d}.mp4"')
    p.add_argument("--force", action="store_true", help="overwrite an existing memory")
    p.add_argument("--workers", dest="build_workers", type=int, default=None)
    p.add_argument("--merge-threshold", type=float, default=None)
    p.add_argument("--max-duration", type=float, default=None)
    p.add_argument("--overlap", type=float, default=None)
    p.add_argument("--gap-threshold", type=float, default=None)
    p.add_argument("--no-speech-window", type=float, default=None)
    _common(p)
    p.set_defaults(func=cmd_build_memory)

    p = sub.add_parser("query", help="run one observation tool against a memory")
    p.add_argument("memory")
    p.add_argument("--tool", required=True, choices=TOOLS)
    p.add_argument("--query", default=None)
    p.add_argument("-k", "--top-k", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--anchor", type=int, default=None)
    p.add_argument("--radius", type=int, default=None, choices=range(1, MAX_RADIUS + 1))
    p.add_argument("--json", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("answer", help="answer one question with the observe-reflect-replan loop")
    p.add_argument("memory")
    p.add_argument("--question", required=True)
    p.add_argument("--option", action="append", help='repeatable, e.g. --option "A=a red car"')
    p.add_argument("--trace", default=None, help="where to write the trace document")
    _common(p)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("eval", help="run a benchmark sweep and score it")
    p.add_argument("dataset")
    p.add_argument("--memory-root", required=True)
    p.add_argument("--mode", choices=("agent", "direct"), default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("score", help="score a predictions file")
    p.add_argument("dataset")
    p.add_argument("predictions")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("inspect", help="show effective configuration, or summarise a memory")
    p.add_argument("memory", nargs="?", default=None)
    _common(p)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (ConfigError, DatasetError, ManifestError, ScoringError, IngestionError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except BackendError as exc:
        _err(f"backend failure: {exc}")
        return EXIT_BACKEND
    except AOPError as exc:
        _err(str(exc))
        return EXIT_SYSTEMIC


if __name__ == "__main__":
    sys.exit(main())
