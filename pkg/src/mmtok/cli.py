"""Single entry-point CLI exposing every pipeline operation.

All commands emit a JSON report wrapped in a stable envelope of
``{tool_version, schema_version, command, seed, report}`` with sorted keys,
so identical inputs always produce byte-identical output. Failures print a
structured error object to stderr and exit with the error kind's code.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .budget import TraceToken, budget_sweep
from .errors import IOFailureError, InvalidConfigError, MMTokError, SchemaError
from .evs import ChangeMetric, PatchGrid, prune
from .formats import read_frame, read_jsonl, read_tensor, thread_cap
from .packing import DEFAULT_BUFFER_SIZE, SampleRecord, pack_buffer, padding_report
from .planner import (
    STAGE_MAX_LENGTHS,
    PromptSpec,
    VideoRequest,
    account_tokens,
    fits_stage,
    plan_shards,
)
from .quant import (
    CalibrationAccumulator,
    QuantFormat,
    QuantSpec,
    finalize_scale,
    quant_error_report,
)
from .tiling import ImageDescriptor, TilingConfig, layout_image, resize_bilinear, slice_tiles
from .video import VideoDescriptor, frame_token_count, plan_frames

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# report plumbing


def _envelope(command: str, seed: int, report: dict) -> dict:
    return {
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "report": report,
    }


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"

def _render_text(value, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines: list[str] = []
    if isinstance(value, dict):
        for key in sorted(value):
            item = value[key]
            if isinstance(item, (dict, list)):
                lines.append(f"{pad}{key}:")
                lines.extend(_render_text(item, indent + 1))
            else:
                lines.append(f"{pad}{key}: {item}")
    elif isinstance(value, list):
        for item in value:
            if isinstance(item, (dict, list)):
                lines.append(f"{pad}-")
                lines.extend(_render_text(item, indent + 1))
            else:
                lines.append(f"{pad}- {item}")
    else:
        lines.append(f"{pad}{value}")
    return lines


def _budget_table(report: dict) -> str:
    headers = ("budget", "thinking_total", "kept", "forced", "forced_at", "answer_offset", "truncated")
    rows = [
        (
            str(s["budget"]),
            str(s["thinking_tokens_total"]),
            str(s["thinking_tokens_kept"]),
            str(s["forced"]).lower(),
            "-" if s["forced_at"] is None else str(s["forced_at"]),
            str(s["answer_offset"]),
            str(s["truncated"]).lower(),
        )
        for s in report["summaries"]
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    out.extend("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows)
    return "\n".join(out) + "\n"


def _emit(args: argparse.Namespace, command: str, report: dict) -> None:
    if args.format == "json":
        text = _dump_json(_envelope(command, args.seed, report))
    elif command == "budget":
        text = _budget_table(report)
    else:
        text = "\n".join(_render_text(report)) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# input parsing helpers


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return obj[key]


def _load_json_file(path: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    return obj


def _tiling_config(args: argparse.Namespace) -> TilingConfig:
    return TilingConfig(
        tile_side=args.tile_side,
        patch_size=args.patch_size,
        max_tiles=args.max_tiles,
        pixel_shuffle_factor=args.shuffle,
        include_thumbnail=not args.no_thumbnail,
    )


def _layout_dict(layout) -> dict:
    return dataclasses.asdict(layout)


# ---------------------------------------------------------------------------
# commands


def _cmd_tile(args: argparse.Namespace) -> None:
    cfg = _tiling_config(args)
    if args.frame:
        pixels = read_frame(args.frame)
        height, width = pixels.shape[:2]
        img = ImageDescriptor(width=width, height=height)
        layout = layout_image(img, cfg)
        resized = resize_bilinear(pixels, layout.resized_height, layout.resized_width)
        tiles = slice_tiles(resized, layout)
        grid_count = layout.grid_rows * layout.grid_cols
        tile_entries = [
            {
                "index": i,
                "kind": "thumbnail" if i >= grid_count else "grid",
                "sha256": hashlib.sha256(t.tobytes()).hexdigest(),
            }
            for i, t in enumerate(tiles)
        ]
        report = {
            "source": {"width": width, "height": height},
            "layout": _layout_dict(layout),
            "tiles": tile_entries,
        }
    else:
        if args.width is None or args.height is None:
            raise InvalidConfigError("tile needs either --frame or both --width and --height")
        img = ImageDescriptor(width=args.width, height=args.height)
        layout = layout_image(img, cfg)
        report = {
            "source": {"width": args.width, "height": args.height},
            "layout": _layout_dict(layout),
        }
    _emit(args, "tile", report)


def _cmd_sample_frames(args: argparse.Namespace) -> None:
    video = VideoDescriptor.from_duration(args.duration, args.fps)
    plan = plan_frames(video, rate=args.rate, cap=args.cap)
    report = {
        "video": {
            "duration": video.duration,
            "native_fps": video.native_fps,
            "frame_count": video.frame_count,
        },
        "mode": plan.mode.value,
        "frames": len(plan.indices),
        "indices": list(plan.indices),
        "timestamps": list(plan.timestamps),
        "visual_tokens": frame_token_count(plan, args.tokens_per_frame),
    }
    _emit(args, "sample-frames", report)


def _cmd_evs(args: argparse.Namespace) -> None:
    frames = [read_frame(p) for p in args.frames]
    first = frames[0].shape
    for path, frame in zip(args.frames, frames):
        if frame.shape != first:
            raise SchemaError(f"{path}: frame shape {frame.shape} differs from first frame {first}")
    grid = PatchGrid.from_frames(frames, patch_size=args.patch_size)
    mask = prune(grid, args.ratio, metric=ChangeMetric(args.metric), threads=thread_cap())
    if args.mask_out:
        Path(args.mask_out).write_bytes(mask.packed_bits())
    report = {
        "frames": grid.frames,
        "rows": grid.rows,
        "cols": grid.cols,
        "patch_size": args.patch_size,
        "metric": args.metric,
        "ratio": args.ratio,
        "prunable": (grid.frames - 1) * grid.rows * grid.cols,
        "dropped": mask.dropped_count,
        "kept_total": int(mask.keep.sum()),
        "kept_per_frame": mask.kept_per_frame(),
        "mask_file": args.mask_out,
    }
    _emit(args, "evs", report)


def _cmd_pack(args: argparse.Namespace) -> None:
    samples = []
    for obj in read_jsonl(args.input):
        samples.append(
            SampleRecord(
                sample_id=str(_require(obj, "sample_id", args.input)),
                total_tokens=int(_require(obj, "total_tokens", args.input)),
                vision_tokens=int(obj.get("vision_tokens", 0)),
                loss_tokens=int(obj.get("loss_tokens", 1)),
            )
        )
    plan = pack_buffer(samples, capacity=args.capacity, buffer_size=args.buffer)
    report = {
        "capacity": plan.capacity,
        "buffer_size": args.buffer,
        "sample_count": len(samples),
        "pack_count": len(plan.packs),
        "packs": [dataclasses.asdict(p) | {"sample_ids": list(p.sample_ids)} for p in plan.packs],
        "leftover": list(plan.leftover),
        "padding_fraction": padding_report(plan),
    }
    _emit(args, "pack", report)


def _cmd_budget(args: argparse.Namespace) -> None:
    trace = []
    for obj in read_jsonl(args.trace):
        trace.append(
            TraceToken(
                token_id=int(_require(obj, "token_id", args.trace)),
                marker=str(obj.get("marker", "none")),
            )
        )
    budgets = [int(b) for b in args.budgets.split(",") if b.strip()]
    if not budgets:
        raise InvalidConfigError("--budgets needs at least one value")
    summaries = budget_sweep(trace, budgets, grace=args.grace)
    report = {
        "grace": args.grace,
        "trace_tokens": len(trace),
        "summaries": [dataclasses.asdict(s) for s in summaries],
    }
    _emit(args, "budget", report)


def _cmd_quant_calibrate(args: argparse.Namespace) -> None:
    fmt = QuantFormat(args.quant_format)
    acc = CalibrationAccumulator()
    for path in args.input:
        acc.observe(read_tensor(path))
    scale = finalize_scale(acc, fmt)
    report = {
        "format": fmt.value,
        "samples_seen": acc.samples_seen,
        "running_amax": acc.running_amax,
        "per_tensor_scale": scale,
    }
    _emit(args, "quant", report)


def _cmd_quant_roundtrip(args: argparse.Namespace) -> None:
    spec_obj = _load_json_file(args.spec)
    fmt_name = str(_require(spec_obj, "format", args.spec))
    try:
        fmt = QuantFormat(fmt_name)
    except ValueError as exc:
        raise SchemaError(f"{args.spec}: unknown format {fmt_name!r}") from exc
    spec = QuantSpec(
        format=fmt,
        per_tensor_scale=float(_require(spec_obj, "per_tensor_scale", args.spec)),
        block_size=int(spec_obj.get("block_size", 16)),
    )
    values = read_tensor(args.input)
    stats = quant_error_report(values, spec)
    report = {
        "format": fmt.value,
        "per_tensor_scale": spec.per_tensor_scale,
        "block_size": spec.block_size if fmt is QuantFormat.NVFP4 else None,
        "count": int(values.size),
        "max_abs_err": stats.max_abs_err,
        "mse": stats.mse,
        "saturation_count": stats.saturation_count,
    }
    _emit(args, "quant", report)


def _parse_prompt(path: str) -> PromptSpec:
    obj = _load_json_file(path)
    images = []
    for i, entry in enumerate(obj.get("images", [])):
        if not isinstance(entry, dict):
            raise SchemaError(f"{path}: images[{i}] must be an object")
        images.append(
            ImageDescriptor(
                width=int(_require(entry, "width", f"{path}: images[{i}]")),
                height=int(_require(entry, "height", f"{path}: images[{i}]")),
            )
        )
    video = None
    if obj.get("video") is not None:
        vid = obj["video"]
        if not isinstance(vid, dict):
            raise SchemaError(f"{path}: video must be an object")
        video = VideoRequest(
            video=VideoDescriptor.from_duration(
                float(_require(vid, "duration", f"{path}: video")),
                float(_require(vid, "fps", f"{path}: video")),
            ),
            evs_ratio=float(vid.get("evs_ratio", 0.0)),
        )
    return PromptSpec(
        text_tokens=int(obj.get("text_tokens", 0)),
        images=tuple(images),
        video=video,
    )


def _cmd_plan(args: argparse.Namespace) -> None:
    prompt = _parse_prompt(args.prompt)
    cfg = TilingConfig()
    account = account_tokens(prompt, cfg)

    if args.stage is not None:
        stages = {args.stage: STAGE_MAX_LENGTHS[args.stage]}
    else:
        stages = dict(STAGE_MAX_LENGTHS)
    fit_reports = {
        str(stage): dataclasses.asdict(fits_stage(account.total, limit))
        for stage, limit in stages.items()
    }

    vision_items = sum(l.total_tiles for l in account.image_layouts) + account.video_frames
    shard_plan = None
    if args.cp is not None:
        plan = plan_shards(account.total, vision_items, args.cp)
        shard_plan = {
            "ways": plan.ways,
            "sequence_ranges": [list(r) for r in plan.sequence_ranges],
            "vision_batch_shards": [list(s) for s in plan.vision_batch_shards],
        }
    report = {
        "accounting": {
            "text_tokens": account.text_tokens,
            "image_tokens": account.image_tokens,
            "image_layouts": [_layout_dict(l) for l in account.image_layouts],
            "video_frames": account.video_frames,
            "video_tokens_raw": account.video_tokens_raw,
            "video_tokens_dropped": account.video_tokens_dropped,
            "video_tokens": account.video_tokens,
            "total": account.total,
        },
        "vision_batch_items": vision_items,
        "stage_fit": fit_reports,
        "shard_plan": shard_plan,
    }
    _emit(args, "plan", report)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmtok",
        description="Deterministic multimodal input-pipeline toolkit.",
    )
    parser.add_argument("--format", choices=("json", "text"), default="json",
                        help="report format (default: json)")
    parser.add_argument("--output", help="write the report to this path instead of stdout")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed recorded in the report envelope (default: 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_tile = sub.add_parser("tile", help="compute a tile layout, optionally slicing a raw frame")
    p_tile.add_argument("--width", type=int)
    p_tile.add_argument("--height", type=int)
    p_tile.add_argument("--frame", help="MMTF frame file; dimensions come from its header")
    p_tile.add_argument("--max-tiles", type=int, default=12)
    p_tile.add_argument("--tile-side", type=int, default=512)
    p_tile.add_argument("--patch-size", type=int, default=16)
    p_tile.add_argument("--shuffle", type=int, default=2, help="pixel shuffle factor")
    p_tile.add_argument("--no-thumbnail", action="store_true")
    p_tile.set_defaults(func=_cmd_tile)

    p_sf = sub.add_parser("sample-frames", help="plan video frame sampling")
    p_sf.add_argument("--duration", type=float, required=True)
    p_sf.add_argument("--fps", type=float, required=True, help="native frame rate")
    p_sf.add_argument("--rate", type=float, default=2.0, help="capture rate in frames/second")
    p_sf.add_argument("--cap", type=int, default=128, help="maximum sampled frames")
    p_sf.add_argument("--tokens-per-frame", type=int, default=256)
    p_sf.set_defaults(func=_cmd_sample_frames)

    p_evs = sub.add_parser("evs", help="prune temporally static patches across frames")
    p_evs.add_argument("--frames", nargs="+", required=True, help="MMTF frame files in order")
    p_evs.add_argument("--ratio", type=float, required=True)
    p_evs.add_argument("--metric", choices=("mad", "cosine"), default="mad")
    p_evs.add_argument("--patch-size", type=int, default=16)
    p_evs.add_argument("--mask-out", help="write the bit-packed keep mask here")
    p_evs.set_defaults(func=_cmd_evs)

    p_pack = sub.add_parser("pack", help="pack samples into fixed-capacity sequences")
    p_pack.add_argument("--input", required=True, help="JSONL of sample records")
    p_pack.add_argument("--capacity", type=int, required=True)
    p_pack.add_argument("--buffer", type=int, default=DEFAULT_BUFFER_SIZE)
    p_pack.set_defaults(func=_cmd_pack)

    p_budget = sub.add_parser("budget", help="sweep reasoning budgets over a recorded trace")
    p_budget.add_argument("--trace", required=True, help="JSONL of {pos, token_id, marker} lines")
    p_budget.add_argument("--budgets", required=True, help="comma-separated budget values")
    p_budget.add_argument("--grace", type=int, default=500)
    p_budget.set_defaults(func=_cmd_budget)

    p_quant = sub.add_parser("quant", help="calibrate scales or measure round-trip error")
    quant_sub = p_quant.add_subparsers(dest="quant_command", required=True)
    p_cal = quant_sub.add_parser("calibrate", help="derive a per-tensor scale from amax")
    p_cal.add_argument("--input", nargs="+", required=True, help="MMTQ tensor files")
    p_cal.add_argument("--format", dest="quant_format", choices=("e4m3", "nvfp4"), default="e4m3")
    p_cal.set_defaults(func=_cmd_quant_calibrate)
    p_rt = quant_sub.add_parser("roundtrip", help="quantize/dequantize and report error stats")
    p_rt.add_argument("--input", required=True, help="MMTQ tensor file")
    p_rt.add_argument("--spec", required=True, help="QuantSpec JSON file")
    p_rt.set_defaults(func=_cmd_quant_roundtrip)

    p_plan = sub.add_parser("plan", help="account prompt tokens and plan shards")
    p_plan.add_argument("--prompt", required=True, help="prompt composition JSON file")
    p_plan.add_argument("--stage", type=int, choices=sorted(STAGE_MAX_LENGTHS),
                        help="check only this training stage's context limit")
    p_plan.add_argument("--cp", type=int, help="context-parallel ways for the shard plan")
    p_plan.set_defaults(func=_cmd_plan)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        try:
            args.func(args)
        except MMTokError:
            raise
        except OSError as exc:
            raise IOFailureError(str(exc)) from exc
    except MMTokError as exc:
        if args.format == "json":
            sys.stderr.write(
                _dump_json({"error_kind": exc.kind, "message": str(exc), "command": args.command})
            )
        else:
            sys.stderr.write(f"error [{exc.kind}]: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
