"""End-to-end token accounting for multimodal prompts and shard planning.

Ties the tiling, video sampling, and pruning arithmetic together: given a
prompt's text length, images, and optional video, compute the total sequence
length, check it against a training-stage context limit, and split both the
sequence and the vision batch across context-parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidConfigError
from .evs import prunable_drop_count
from .tiling import ImageDescriptor, TileLayout, TilingConfig, layout_image
from .video import FramePlan, VideoDescriptor, frame_token_count, plan_frames

# Max Length per training stage; stages 0-1 share a limit, as do 2-3.
STAGE_MAX_LENGTHS = {0: 16_384, 1: 16_384, 2: 49_152, 3: 49_152, 4: 311_296}


@dataclass(frozen=True)
class VideoRequest:
    """A video attached to a prompt, with the prune ratio to apply (0 disables)."""

    video: VideoDescriptor
    evs_ratio: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.evs_ratio <= 1.0:
            raise InvalidConfigError(f"evs_ratio must be in [0, 1], got {self.evs_ratio}")


@dataclass(frozen=True)
class PromptSpec:
    """Composition of one interleaved multimodal prompt."""

    text_tokens: int = 0
    images: tuple[ImageDescriptor, ...] = ()
    video: VideoRequest | None = None

    def __post_init__(self) -> None:
        if self.text_tokens < 0:
            raise InvalidConfigError(f"text_tokens must be >= 0, got {self.text_tokens}")


@dataclass(frozen=True)
class TokenAccount:
    """Sequence length breakdown per source."""

    text_tokens: int
    image_tokens: int
    image_layouts: tuple[TileLayout, ...]
    video_frames: int
    video_tokens_raw: int
    video_tokens_dropped: int
    video_tokens: int
    total: int
    frame_plan: FramePlan | None = None


def account_tokens(prompt: PromptSpec, cfg: TilingConfig = TilingConfig()) -> TokenAccount:
    """Total sequence length of a prompt with a per-source breakdown.

    Images contribute their full tile layouts. Video frames are limited to a
    single tile each, and the prune ratio removes its share of the non-first
    frames' token lattice. Special separator tokens, if any, are the caller's
    to count as text.
    """
    layouts = tuple(layout_image(img, cfg) for img in prompt.images)
    image_tokens = sum(l.total_tokens for l in layouts)

    frames = 0
    raw = 0
    dropped = 0
    plan = None
    if prompt.video is not None:
        plan = plan_frames(prompt.video.video)
        frames = len(plan.indices)
        raw = frame_token_count(plan, cfg.tokens_per_tile)
        if frames and prompt.video.evs_ratio > 0.0:
            side = cfg.patches_per_side // cfg.pixel_shuffle_factor
            dropped = prunable_drop_count(frames, side, side, prompt.video.evs_ratio)

    video_tokens = raw - dropped
    total = prompt.text_tokens + image_tokens + video_tokens
    return TokenAccount(
        text_tokens=prompt.text_tokens,
        image_tokens=image_tokens,
        image_layouts=layouts,
        video_frames=frames,
        video_tokens_raw=raw,
        video_tokens_dropped=dropped,
        video_tokens=video_tokens,
        total=total,
        frame_plan=plan,
    )


@dataclass(frozen=True)
class FitReport:
    total: int
    stage_max: int
    fits: bool
    margin: int     # negative when the prompt exceeds the limit


def fits_stage(total: int, stage_max: int) -> FitReport:
    """Whether a sequence fits a stage's context limit, with the headroom left."""
    if stage_max < 1:
        raise InvalidConfigError(f"stage_max must be >= 1, got {stage_max}")
    return FitReport(total=total, stage_max=stage_max, fits=total <= stage_max, margin=stage_max - total)


@dataclass(frozen=True)
class ShardPlan:
    """Context-parallel split of a sequence and its vision batch."""

    ways: int
    sequence_ranges: tuple[tuple[int, int], ...]
    vision_batch_shards: tuple[tuple[int, ...], ...]


def plan_shards(seq_len: int, tiles: int, ways: int) -> ShardPlan:
    """Split the sequence into contiguous near-equal ranges and deal tiles round-robin.

    Ranges partition [0, seq_len) exactly with sizes differing by at most one
    (longer ranges first). Tile index i lands in shard i mod ways, so shard
    sizes also differ by at most one and a round-robin gather restores the
    original tile order.
    """
    if ways < 1:
        raise InvalidConfigError(f"ways must be >= 1, got {ways}")
    if seq_len < ways:
        raise InvalidConfigError(f"cannot split {seq_len} positions across {ways} shards")
    if tiles < 0:
        raise InvalidConfigError(f"tiles must be >= 0, got {tiles}")

    base, extra = divmod(seq_len, ways)
    ranges = []
    start = 0
    for i in range(ways):
        size = base + (1 if i < extra else 0)
        ranges.append((start, start + size))
        start += size

    shards = tuple(tuple(range(i, tiles, ways)) for i in range(ways))
    return ShardPlan(ways=ways, sequence_ranges=tuple(ranges), vision_batch_shards=shards)


def gather_tiles(plan: ShardPlan) -> list[int]:
    """Round-robin gather of the vision shards back into original tile order."""
    out: list[int] = []
    cursors = [0] * plan.ways
    total = sum(len(s) for s in plan.vision_batch_shards)
    while len(out) < total:
        shard = len(out) % plan.ways
        out.append(plan.vision_batch_shards[shard][cursors[shard]])
        cursors[shard] += 1
    return out
