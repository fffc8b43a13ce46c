"""Acceptance suite: one test per release criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one PASS/FAIL line per criterion. Tolerances are pinned here, not configured.
"""

import json
import math
import os
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from mmtok.budget import BudgetConfig, TraceToken, budget_sweep, filter_stream
from mmtok.evs import PatchGrid, prune
from mmtok.packing import SampleRecord, pack_buffer, padding_report, square_average_weights
from mmtok.planner import PromptSpec, VideoRequest, account_tokens, fits_stage, gather_tiles, plan_shards
from mmtok.quant import (
    CalibrationAccumulator,
    QuantFormat,
    e4m3_quantize,
    e4m3_roundtrip,
    e4m3_value,
    finalize_scale,
    nvfp4_dequantize_block,
    nvfp4_dequantize_tensor,
    nvfp4_quantize_block,
    nvfp4_quantize_tensor,
)
from mmtok.tiling import ImageDescriptor, TilingConfig, layout_image, pixel_shuffle_map, select_grid
from mmtok.video import SamplingMode, VideoDescriptor, plan_frames

from helpers import fifo_padding_fraction, optimal_bin_count, oracle_select_grid

FIXTURES = Path(__file__).parent / "fixtures"
SRC = str(Path(__file__).parent.parent / "src")


def test_c01_tiling_matches_exhaustive_oracle_under_5s():
    """10,000 random sizes in [1, 8192]^2: zero mismatches, under 5 seconds."""
    rng = np.random.default_rng(1)
    sizes = rng.integers(1, 8193, size=(10_000, 2))
    cfg = TilingConfig()
    started = time.perf_counter()
    mismatches = 0
    for w, h in sizes:
        img = ImageDescriptor(int(w), int(h))
        if select_grid(img, cfg) != oracle_select_grid(int(w), int(h)):
            mismatches += 1
    elapsed = time.perf_counter() - started
    assert mismatches == 0
    assert elapsed < 5.0, f"oracle sweep took {elapsed:.2f}s"


def test_c02_token_constants_exact():
    """1024 tokens per tile before shuffle, 256 after, 12-tile grid cap."""
    assert TilingConfig(pixel_shuffle_factor=1).tokens_per_tile == 1024
    assert TilingConfig().tokens_per_tile == 256
    assert TilingConfig().max_tiles == 12
    assert len(pixel_shuffle_map(32, 2)) == 256
    layout = layout_image(ImageDescriptor(8192, 8192))
    assert layout.grid_rows * layout.grid_cols <= 12


def test_c03_video_policy_table_exact():
    """Frame counts and modes for the six reference durations."""
    durations = [1.0, 30.0, 64.0, 64.01, 100.0, 3600.0]
    expected_counts = [2, 60, 128, 128, 128, 128]
    expected_modes = [
        SamplingMode.FIXED_RATE,
        SamplingMode.FIXED_RATE,
        SamplingMode.FIXED_RATE,
        SamplingMode.UNIFORM,
        SamplingMode.UNIFORM,
        SamplingMode.UNIFORM,
    ]
    for duration, count, mode in zip(durations, expected_counts, expected_modes):
        plan = plan_frames(VideoDescriptor.from_duration(duration, 30.0))
        assert len(plan.indices) == count, f"duration {duration}"
        assert plan.mode is mode, f"duration {duration}"


def test_c04_evs_exactness_sweep():
    """Dropped counts exactly floor(r * prunable); frame 0 intact; nested drops."""
    ratios = [0.0, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0]
    for frames in (2, 8, 128):
        rng = np.random.default_rng(frames)
        grid = PatchGrid(values=rng.normal(0.0, 1.0, size=(frames, 16, 16, 4)))
        previous_dropped: set = set()
        for ratio in ratios:
            mask = prune(grid, ratio)
            expected = math.floor(Fraction(ratio) * (frames - 1) * 16 * 16)
            assert mask.dropped_count == expected, f"F={frames} r={ratio}"
            assert mask.keep[0].all()
            dropped = {tuple(p) for p in np.argwhere(~mask.keep)}
            assert previous_dropped <= dropped, f"subset broken at F={frames} r={ratio}"
            previous_dropped = dropped


def test_c05_evs_half_ratio_halves_video_tokens():
    """Proxy for the efficiency claim: r=0.5 cuts a 128-frame prompt's visual
    tokens by at least 49 percent (throughput itself is hardware-bound and out
    of scope)."""
    video = VideoRequest(
        video=VideoDescriptor.from_duration(100.0, 30.0), evs_ratio=0.5
    )
    off = account_tokens(PromptSpec(video=VideoRequest(video=video.video, evs_ratio=0.0)))
    on = account_tokens(PromptSpec(video=video))
    assert off.video_tokens == 32_768
    reduction = 1.0 - on.video_tokens / off.video_tokens
    assert reduction >= 0.49


def test_c06_packing_bulk_and_oracle():
    """100 workloads of 10^4 samples: no violations, no loss, FFD beats FIFO
    every time; small instances agree with the exhaustive oracle."""
    capacity = 16_384
    lo, hi = math.log(16), math.log(capacity)
    ffd_wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        lengths = [int(round(x)) for x in np.exp(rng.uniform(lo, hi, size=10_000))]
        samples = [
            SampleRecord(f"s{i}", n, vision_tokens=min(n, int(n * 0.25)))
            for i, n in enumerate(lengths)
        ]
        plan = pack_buffer(samples, capacity=capacity)
        packed = [sid for p in plan.packs for sid in p.sample_ids]
        assert len(packed) == len(samples)
        assert len(set(packed)) == len(samples)
        assert all(p.used_tokens <= capacity for p in plan.packs)
        if padding_report(plan) <= fifo_padding_fraction(lengths, capacity):
            ffd_wins += 1
    assert ffd_wins == 100

    oracle_rng = np.random.default_rng(2024)
    for _ in range(50):
        count = int(oracle_rng.integers(1, 11))
        lengths = [int(oracle_rng.integers(1, 1001)) for _ in range(count)]
        plan = pack_buffer(
            [SampleRecord(f"s{i}", n) for i, n in enumerate(lengths)], capacity=1000
        )
        assert len(plan.packs) == optimal_bin_count(lengths, 1000)


def test_c07_loss_weighting_identity():
    """Equal-length batches: weighted batch loss equals the token mean to 1e-12."""
    rng = np.random.default_rng(5)
    for n, k in [(1, 1), (7, 3), (128, 16), (4096, 64)]:
        losses = rng.uniform(0.0, 2.0, size=(k, n))
        weighting = square_average_weights([n] * k)
        batch = weighting.combine([row.sum() for row in losses])
        mean = losses.mean()
        assert abs(batch - mean) <= 1e-12 * abs(mean)


def test_c08_budget_controller():
    """Infinite thought forces the close in the 2548th slot; budget 0 is a
    byte-identical pass-through; kept tokens are monotone in the budget."""
    open_m, close_m = "<think>", "</think>"
    endless = ["p0", "p1", open_m] + [f"t{i}" for i in range(4000)]
    out, state = filter_stream(endless, BudgetConfig(budget=2048, grace=500))
    close_at = out.index(close_m)
    open_at = out.index(open_m)
    assert close_at - open_at - 1 == 2547    # the 2548th thinking slot is the close
    assert state.forced_close

    closing = ["x", open_m] + [f"t{i}" for i in range(300)] + [close_m, "ans"]
    for tokens in (endless, closing):
        out0, _ = filter_stream(tokens, BudgetConfig(budget=0))
        assert out0 == tokens

    budgets = [2048, 4096, 8192, 12288]
    rng = np.random.default_rng(9)
    for trial in range(1_000):
        thinking = int(rng.integers(0, 13_500)) if trial % 10 == 0 else int(rng.integers(0, 3_200))
        trace = (
            [TraceToken(token_id=i) for i in range(int(rng.integers(0, 4)))]
            + [TraceToken(token_id=500, marker="open")]
            + [TraceToken(token_id=1000 + i) for i in range(thinking)]
            + [TraceToken(token_id=501, marker="close")]
            + [TraceToken(token_id=2000)]
        )
        kept = [s.thinking_tokens_kept for s in budget_sweep(trace, budgets, grace=500)]
        assert kept == sorted(kept), f"trial {trial}: {kept}"


def test_c09_e4m3_codec():
    """Round-trip identity on all 256 codes, monotonicity over a million reals,
    exact saturation at 448, and the amax scale formula on hand cases."""
    codes = np.arange(256, dtype=np.uint8)
    values = np.asarray(e4m3_value(codes))
    finite = np.isfinite(values)
    assert finite.sum() == 254
    requantized = e4m3_quantize(np.where(finite, values, 0.0), 1.0)
    assert (requantized[finite] == codes[finite]).all()
    assert e4m3_quantize(float("nan"), 1.0) == 0x7F
    assert e4m3_quantize(np.copysign(np.nan, -1.0), 1.0) == 0xFF

    rng = np.random.default_rng(11)
    xs = np.sort(rng.normal(0.0, 150.0, size=1_000_000))
    ys = np.asarray(e4m3_roundtrip(xs, 1.0))
    assert (np.diff(ys) >= 0.0).all()

    assert e4m3_roundtrip(448.0, 1.0) == 448.0
    assert e4m3_roundtrip(1e12, 1.0) == 448.0
    assert e4m3_roundtrip(-1e12, 1.0) == -448.0
    assert np.asarray(e4m3_roundtrip(xs[np.abs(xs) >= 448.0], 1.0) == np.sign(
        xs[np.abs(xs) >= 448.0]) * 448.0).all()

    for amax, expected in [(896.0, 2.0), (448.0, 1.0), (1.0, 1.0 / 448.0)]:
        acc = CalibrationAccumulator(running_amax=amax, samples_seen=1)
        assert finalize_scale(acc, QuantFormat.E4M3) == expected


def test_c10_nvfp4_blocks():
    """All-zero blocks are exact, random blocks stay within half the local
    effective codebook gap, and per-block coding is independent."""
    zero = nvfp4_quantize_block(np.zeros(16), 1.0)
    np.testing.assert_array_equal(nvfp4_dequantize_block(zero, 1.0), np.zeros(16))

    codebook = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0])
    rng = np.random.default_rng(13)
    for trial in range(300):
        scale = float(rng.choice([0.5, 1.0, 2.0]))
        spread = float(rng.uniform(0.05, 40.0))
        xs = rng.normal(0.0, spread, size=16)
        block = nvfp4_quantize_block(xs, scale)
        recon = nvfp4_dequantize_block(block, scale)
        eff = float(np.asarray(e4m3_value(block.scale_code))) * scale
        points = np.sort(np.concatenate([codebook, -codebook])) * eff
        for x, r in zip(xs, recon):
            right = np.searchsorted(points, x)
            lower = points[max(right - 1, 0)]
            upper = points[min(right, len(points) - 1)]
            half_gap = max((upper - lower) / 2.0, eff)
            assert abs(r - x) <= half_gap * (1 + 1e-12), f"trial {trial}"

    xs = rng.normal(0.0, 4.0, size=160)
    whole = nvfp4_quantize_tensor(xs, 1.0, block_size=16)
    parts = [nvfp4_quantize_block(xs[i:i + 16], 1.0) for i in range(0, 160, 16)]
    assert [b.scale_code for b in whole] == [b.scale_code for b in parts]
    np.testing.assert_array_equal(
        nvfp4_dequantize_tensor(whole, 1.0), nvfp4_dequantize_tensor(parts, 1.0)
    )


def test_c11_planner_reproduces_examples():
    """The three accounting examples, the stage-limit ladder, and exact shard
    partitions for 1, 2, and 8 ways."""
    image_prompt = PromptSpec(text_tokens=100, images=(ImageDescriptor(1024, 512),))
    assert account_tokens(image_prompt).total == 868

    video = VideoDescriptor.from_duration(100.0, 30.0)
    plain = PromptSpec(text_tokens=500, video=VideoRequest(video=video, evs_ratio=0.0))
    assert account_tokens(plain).total == 33_268
    pruned = PromptSpec(text_tokens=500, video=VideoRequest(video=video, evs_ratio=0.5))
    assert account_tokens(pruned).total == 17_012

    total = 33_268
    assert not fits_stage(total, 16_384).fits
    stage2 = fits_stage(total, 49_152)
    assert stage2.fits and stage2.margin == 15_884
    assert fits_stage(total, 311_296).fits
    assert fits_stage(311_296, 311_296).fits

    for ways in (1, 2, 8):
        plan = plan_shards(17_012, tiles=131, ways=ways)
        spans = plan.sequence_ranges
        assert spans[0][0] == 0 and spans[-1][1] == 17_012
        assert all(a[1] == b[0] for a, b in zip(spans, spans[1:]))
        sizes = [e - s for s, e in spans]
        assert max(sizes) - min(sizes) <= 1
        assert gather_tiles(plan) == list(range(131))


def test_c12_cli_byte_identical_reruns():
    """Every documented command, run twice on the committed fixtures, produces
    byte-identical stdout."""
    fx = FIXTURES
    commands = [
        ["tile", "--width", "1024", "--height", "512"],
        ["tile", "--frame", str(fx / "frame_160x120.mmtf"), "--tile-side", "64"],
        ["sample-frames", "--duration", "100", "--fps", "30"],
        ["sample-frames", "--duration", "30", "--fps", "24"],
        ["evs", "--frames", *(str(fx / f"video_frame_{i:03d}.mmtf") for i in range(4)),
         "--ratio", "0.5"],
        ["evs", "--frames", *(str(fx / f"video_frame_{i:03d}.mmtf") for i in range(4)),
         "--ratio", "0.75", "--metric", "cosine"],
        ["pack", "--input", str(fx / "samples.jsonl"), "--capacity", "8192"],
        ["budget", "--trace", str(fx / "trace.jsonl"),
         "--budgets", "2048,4096,8192,12288", "--grace", "500"],
        ["--format", "text", "budget", "--trace", str(fx / "trace.jsonl"), "--budgets", "2048"],
        ["quant", "calibrate", "--input",
         *(str(fx / f"calib_{i:03d}.mmtq") for i in range(4)), "--format", "e4m3"],
        ["quant", "roundtrip", "--input", str(fx / "e4m3_codebook.mmtq"),
         "--spec", str(fx / "spec_e4m3.json")],
        ["quant", "roundtrip", "--input", str(fx / "tensor_roundtrip.mmtq"),
         "--spec", str(fx / "spec_nvfp4.json")],
        ["plan", "--prompt", str(fx / "prompt.json"), "--cp", "2"],
        ["plan", "--prompt", str(fx / "prompt_empty.json")],
    ]
    env = {**os.environ, "PYTHONPATH": SRC}
    env.pop("MMTF_THREADS", None)
    for argv in commands:
        runs = [
            subprocess.run(
                [sys.executable, "-m", "mmtok", *argv], capture_output=True, env=env
            )
            for _ in range(2)
        ]
        assert runs[0].returncode == 0, f"{argv}: {runs[0].stderr.decode()}"
        assert runs[0].stdout == runs[1].stdout, f"non-deterministic output for {argv}"
        assert runs[0].stdout, f"empty output for {argv}"

    codebook = run_quant_roundtrip_codebook(env)
    assert codebook["report"]["max_abs_err"] == 0.0


def run_quant_roundtrip_codebook(env):
    proc = subprocess.run(
        [sys.executable, "-m", "mmtok", "quant", "roundtrip",
         "--input", str(FIXTURES / "e4m3_codebook.mmtq"),
         "--spec", str(FIXTURES / "spec_e4m3.json")],
        capture_output=True, env=env,
    )
    assert proc.returncode == 0
    return json.loads(proc.stdout)
