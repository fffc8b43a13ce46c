#!/usr/bin/env python3
"""Regenerate the committed test fixtures under tests/fixtures.

Everything is derived from fixed seeds or closed-form patterns, so rerunning
this script must reproduce the committed files byte for byte.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from mmtok.formats import write_frame, write_tensor  # noqa: E402
from mmtok.quant import e4m3_value  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"


def gradient_frame(width: int, height: int, phase: int = 0) -> np.ndarray:
    """A deterministic RGB test pattern with structure along both axes."""
    x = np.arange(width, dtype=np.int64)
    y = np.arange(height, dtype=np.int64)
    r = (x[None, :] * 255 // max(width - 1, 1)).astype(np.uint8)
    g = (y[:, None] * 255 // max(height - 1, 1)).astype(np.uint8)
    b = ((x[None, :] + y[:, None] + phase) % 256).astype(np.uint8)
    return np.stack(
        [np.broadcast_to(r, (height, width)), np.broadcast_to(g, (height, width)), b],
        axis=-1,
    )


def video_frames() -> list[np.ndarray]:
    """Four 64x32 frames: left half static, right half shifting each frame."""
    frames = []
    base = gradient_frame(64, 32)
    for t in range(4):
        frame = base.copy()
        frame[:, 32:, 2] = ((np.arange(32)[None, :] + 7 * t) % 256).astype(np.uint8)
        frames.append(frame)
    return frames


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)

    write_frame(FIXTURES / "frame_160x120.mmtf", gradient_frame(160, 120))
    for i, frame in enumerate(video_frames()):
        write_frame(FIXTURES / f"video_frame_{i:03d}.mmtf", frame)

    rng = np.random.default_rng(20240001)
    lengths = rng.integers(64, 4097, size=24)
    vision = rng.integers(0, 2049, size=24)
    with open(FIXTURES / "samples.jsonl", "w", encoding="utf-8") as fh:
        for i in range(24):
            total = int(lengths[i])
            record = {
                "sample_id": f"s{i:03d}",
                "total_tokens": total,
                "vision_tokens": int(min(vision[i], total)),
                "loss_tokens": max(1, total // 4),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    with open(FIXTURES / "trace.jsonl", "w", encoding="utf-8") as fh:
        pos = 0
        def line(token_id: int, marker: str = "none") -> str:
            nonlocal pos
            obj = {"pos": pos, "token_id": token_id, "marker": marker}
            pos += 1
            return json.dumps(obj, sort_keys=True) + "\n"
        for i in range(5):
            fh.write(line(100 + i))
        fh.write(line(1, "open"))
        for i in range(3000):
            fh.write(line(1000 + (i % 50)))
        fh.write(line(2, "close"))
        for i in range(20):
            fh.write(line(200 + i))

    prompt = {
        "text_tokens": 500,
        "images": [{"width": 1024, "height": 512}],
        "video": {"duration": 100.0, "fps": 30.0, "evs_ratio": 0.5},
    }
    (FIXTURES / "prompt.json").write_text(json.dumps(prompt, indent=2, sort_keys=True) + "\n")
    empty = {"text_tokens": 0, "images": [], "video": None}
    (FIXTURES / "prompt_empty.json").write_text(json.dumps(empty, indent=2, sort_keys=True) + "\n")

    calib_rng = np.random.default_rng(20240002)
    for i in range(4):
        write_tensor(FIXTURES / f"calib_{i:03d}.mmtq", calib_rng.normal(0.0, 2.0, size=256))

    rt_rng = np.random.default_rng(20240003)
    write_tensor(FIXTURES / "tensor_roundtrip.mmtq", rt_rng.normal(0.0, 50.0, size=512))

    codes = np.arange(256, dtype=np.uint8)
    values = np.asarray(e4m3_value(codes))
    write_tensor(FIXTURES / "e4m3_codebook.mmtq", values[np.isfinite(values)])

    spec_e4m3 = {"format": "e4m3", "per_tensor_scale": 1.0}
    (FIXTURES / "spec_e4m3.json").write_text(json.dumps(spec_e4m3, indent=2, sort_keys=True) + "\n")
    spec_nvfp4 = {"format": "nvfp4", "per_tensor_scale": 1.0, "block_size": 16}
    (FIXTURES / "spec_nvfp4.json").write_text(json.dumps(spec_nvfp4, indent=2, sort_keys=True) + "\n")

    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
