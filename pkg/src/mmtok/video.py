"""Video frame sampling: fixed-rate capture with a frame cap and uniform fallback.

Short videos are sampled at a fixed rate (default 2 frames per second). Once
the fixed-rate plan would exceed the cap (default 128 frames, i.e. videos
strictly longer than 64 seconds at the defaults), the plan switches to exactly
``cap`` uniformly spaced samples taken at bin centers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidConfigError


class SamplingMode(enum.Enum):
    FIXED_RATE = "fixed_rate"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class VideoDescriptor:
    """Length metadata for a video: duration, native frame rate, frame count."""

    duration: float
    native_fps: float
    frame_count: int

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise InvalidConfigError(f"duration must be positive, got {self.duration}")
        if self.native_fps <= 0:
            raise InvalidConfigError(f"native_fps must be positive, got {self.native_fps}")
        if self.frame_count < 1:
            raise InvalidConfigError(f"frame_count must be >= 1, got {self.frame_count}")
        if abs(self.frame_count - self.duration * self.native_fps) > 1 + 1e-9:
            raise InvalidConfigError(
                f"frame_count {self.frame_count} inconsistent with "
                f"duration*native_fps = {self.duration * self.native_fps:.3f}"
            )

    @classmethod
    def from_duration(cls, duration: float, native_fps: float) -> "VideoDescriptor":
        """Build a descriptor with the frame count implied by duration and fps."""
        if duration <= 0 or native_fps <= 0:
            raise InvalidConfigError("duration and native_fps must be positive")
        return cls(duration, native_fps, max(1, round(duration * native_fps)))


@dataclass(frozen=True)
class FramePlan:
    """Sampled native frame indices with their timestamps and the mode used."""

    indices: tuple[int, ...]
    timestamps: tuple[float, ...]
    mode: SamplingMode


def _nearest_index(timestamp: float, video: VideoDescriptor) -> int:
    # round half to even, clamped to the valid native range
    idx = round(timestamp * video.native_fps)
    return min(max(idx, 0), video.frame_count - 1)


def plan_frames(video: VideoDescriptor, rate: float = 2.0, cap: int = 128) -> FramePlan:
    """Plan which native frames to sample.

    Fixed-rate mode anchors the first sample at t=0 and takes floor(duration*rate)
    samples spaced 1/rate apart; consecutive timestamps that round to the same
    native frame are deduplicated (only possible when native_fps < rate or the
    clamp engages at the tail). Uniform mode takes exactly ``cap`` samples at
    bin centers (k + 0.5) * duration / cap, which may repeat native indices for
    very low native frame rates.
    """
    if rate <= 0:
        raise InvalidConfigError(f"rate must be positive, got {rate}")
    if cap < 1:
        raise InvalidConfigError(f"cap must be >= 1, got {cap}")

    # Exact rational arithmetic so boundary durations classify deterministically.
    demand = Fraction(video.duration) * Fraction(rate)
    if demand > cap:
        timestamps = tuple((k + 0.5) * video.duration / cap for k in range(cap))
        indices = tuple(_nearest_index(t, video) for t in timestamps)
        return FramePlan(indices=indices, timestamps=timestamps, mode=SamplingMode.UNIFORM)

    count = int(math.floor(demand))
    timestamps = []
    indices = []
    seen = set()
    for k in range(count):
        t = k / rate
        idx = _nearest_index(t, video)
        if idx in seen:
            continue
        seen.add(idx)
        timestamps.append(t)
        indices.append(idx)
    return FramePlan(indices=tuple(indices), timestamps=tuple(timestamps), mode=SamplingMode.FIXED_RATE)


def frame_token_count(plan: FramePlan, tokens_per_tile: int = 256) -> int:
    """Visual tokens contributed by a frame plan; each frame is a single tile."""
    if tokens_per_tile < 1:
        raise InvalidConfigError(f"tokens_per_tile must be >= 1, got {tokens_per_tile}")
    return len(plan.indices) * tokens_per_tile
