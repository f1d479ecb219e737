"""Command line entry points: detect, bench, cost, record."""

import argparse
import sys
from typing import Any, Dict, List, Optional

from .bench import load_annotations, render_metrics_text, run_benchmark
from .config import load_config
from .errors import ConfigError, HalluscanError
from .gateway import estimate_cost
from .pipeline import run_detect

_FLAG_TO_KEY = {
    "backend": "backend",
    "fixtures": "fixture_dir",
    "base_url": "endpoint",
    "model": "model",
    "stride": "stride",
    "extractor": "extractor",
    "metric": "metric",
    "fps": "synthetic_fps",
    "decoder_cmd": "decoder_cmd",
    "m": "m",
    "m_auto": "m_auto",
    "tau_d": "tau_d",
    "tau_c": "tau_c",
    "dc_fraction": "dc_fraction",
    "kernel": "kernel",
    "workers": "workers",
    "ablation": "ablation",
    "alpha": "alpha",
    "beta": "beta",
    "gamma": "gamma",
    "agg_mode": "agg_mode",
    "per_call": "per_call_usd",
    "max_retries": "max_retries",
    "max_image_edge": "max_image_edge",
    "check_premise": "check_premise",
    "fail_fast": "fail_fast",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--backend", choices=["live", "record", "replay"])
    parser.add_argument("--fixtures", help="fixture directory for record/replay")
    parser.add_argument("--base-url", dest="base_url")
    parser.add_argument("--model")
    parser.add_argument("--stride", type=int)
    parser.add_argument("--extractor")
    parser.add_argument("--metric")
    parser.add_argument("--fps", type=float, help="synthetic frame rate for directories")
    parser.add_argument("--decoder-cmd", dest="decoder_cmd")
    parser.add_argument("--m", type=int, help="keyframe count")
    parser.add_argument("--m-auto", dest="m_auto", action=argparse.BooleanOptionalAction)
    parser.add_argument("--tau-d", dest="tau_d", type=float)
    parser.add_argument("--tau-c", dest="tau_c", type=float)
    parser.add_argument("--dc-fraction", dest="dc_fraction", type=float)
    parser.add_argument("--kernel", choices=["gaussian", "cutoff"])
    parser.add_argument("--workers", type=int)
    parser.add_argument(
        "--ablation", choices=["full", "no_static_kg", "no_dynamic_kg", "no_kg"]
    )
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--agg-mode", dest="agg_mode", choices=["max", "weighted"])
    parser.add_argument("--per-call", dest="per_call", type=float)
    parser.add_argument("--max-retries", dest="max_retries", type=int)
    parser.add_argument("--max-image-edge", dest="max_image_edge", type=int)
    parser.add_argument(
        "--check-premise", dest="check_premise", action=argparse.BooleanOptionalAction
    )
    parser.add_argument(
        "--fail-fast", dest="fail_fast", action=argparse.BooleanOptionalAction
    )


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out = {}
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def _cmd_detect(args: argparse.Namespace, force_backend: Optional[str] = None) -> int:
    overrides = _overrides(args)
    if force_backend is not None:
        overrides["backend"] = force_backend
    cfg = load_config(args.config, overrides)
    doc, paths = run_detect(
        args.source, args.prompt, cfg, video_id=args.video_id, out_dir=args.out
    )
    print(
        "%s: score %.2f, %d findings, %d gateway calls"
        % (
            doc["video_id"],
            doc["score"]["value"],
            len(doc["findings"]),
            doc["ledger"]["total_calls"],
        )
    )
    for kind in sorted(paths):
        print("wrote %s" % (paths[kind],))
    return 0


def _cmd_record(args: argparse.Namespace) -> int:
    return _cmd_detect(args, force_backend="record")


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    metrics = run_benchmark(args.dataset, args.frames_root, cfg, args.out)
    print(render_metrics_text(metrics), end="")
    return 0


def _cmd_cost(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    if args.dataset is not None:
        records = load_annotations(args.dataset)
        per_calls, per_cost = estimate_cost(cfg.m, cfg.per_call_usd)
        calls = per_calls * len(records)
        cost = per_cost * len(records)
        print(
            "%d videos at m=%d: %d calls, $%.2f" % (len(records), cfg.m, calls, cost)
        )
    else:
        m = args.m_value if args.m_value is not None else float(cfg.m)
        if m < 1:
            raise ConfigError("--m must be >= 1")
        calls, cost = estimate_cost(m, cfg.per_call_usd)
        print("m=%g: %d calls, $%.2f" % (m, calls, cost))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halluscan",
        description="Detect hallucinations in generated video and score quality.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="analyze one video")
    p_detect.add_argument("source", help="frame directory or container file")
    p_detect.add_argument("--prompt", required=True, help="the generation prompt")
    p_detect.add_argument("--video-id", dest="video_id")
    p_detect.add_argument("--out", default="reports", help="report output directory")
    _add_config_flags(p_detect)
    p_detect.set_defaults(func=_cmd_detect)

    p_record = sub.add_parser(
        "record", help="analyze one video live and persist gateway fixtures"
    )
    p_record.add_argument("source")
    p_record.add_argument("--prompt", required=True)
    p_record.add_argument("--video-id", dest="video_id")
    p_record.add_argument("--out", default="reports")
    _add_config_flags(p_record)
    p_record.set_defaults(func=_cmd_record)

    p_bench = sub.add_parser("bench", help="evaluate over an annotated dataset")
    p_bench.add_argument("dataset", help="JSON-lines annotation file")
    p_bench.add_argument(
        "--frames-root",
        dest="frames_root",
        required=True,
        help="directory holding one frame directory per video_id",
    )
    p_bench.add_argument("--out", default="bench-out")
    _add_config_flags(p_bench)
    p_bench.set_defaults(func=_cmd_bench)

    p_cost = sub.add_parser("cost", help="estimate gateway calls and spend")
    p_cost.add_argument("--m", dest="m_value", type=float, help="keyframe count")
    p_cost.add_argument("--dataset", help="estimate across an annotation file")
    p_cost.add_argument("--config", help="JSON config file")
    p_cost.add_argument("--per-call", dest="per_call", type=float)
    p_cost.set_defaults(func=_cmd_cost)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except HalluscanError as exc:
        print("error: %s" % (exc,), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
