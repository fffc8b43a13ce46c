"""Buffered sequence packing and loss weighting for variable-length samples.

Samples stream through a bounded buffer. Each time the buffer fills (or input
ends) it is flushed: samples are placed largest-first into packs of fixed
token capacity, and when several open packs could take a sample the one with
the least vision tokens wins, spreading vision compute evenly across packs.
Packs close at the end of the flush that created them, as an online trainer
would consume them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidConfigError, InvalidSampleError, OversizeSampleError

DEFAULT_BUFFER_SIZE = 4096


@dataclass(frozen=True)
class SampleRecord:
    """One training sample's token accounting."""

    sample_id: str
    total_tokens: int
    vision_tokens: int = 0
    loss_tokens: int = 1

    def __post_init__(self) -> None:
        if self.total_tokens < 1:
            raise InvalidSampleError(f"{self.sample_id}: total_tokens must be >= 1")
        if not 0 <= self.vision_tokens <= self.total_tokens:
            raise InvalidSampleError(
                f"{self.sample_id}: vision_tokens {self.vision_tokens} outside "
                f"[0, {self.total_tokens}]"
            )
        if not 1 <= self.loss_tokens <= self.total_tokens:
            raise InvalidSampleError(
                f"{self.sample_id}: loss_tokens {self.loss_tokens} outside "
                f"[1, {self.total_tokens}]"
            )


@dataclass(frozen=True)
class Pack:
    """A closed fixed-capacity sequence and the samples packed into it."""

    sample_ids: tuple[str, ...]
    used_tokens: int
    padding_tokens: int
    vision_tokens: int


@dataclass(frozen=True)
class PackPlan:
    capacity: int
    packs: tuple[Pack, ...]
    leftover: tuple[str, ...]


class _OpenPack:
    __slots__ = ("index", "samples", "used", "vision")

    def __init__(self, index: int) -> None:
        self.index = index
        self.samples: list[SampleRecord] = []
        self.used = 0
        self.vision = 0

    def take(self, sample: SampleRecord) -> None:
        self.samples.append(sample)
        self.used += sample.total_tokens
        self.vision += sample.vision_tokens


class SequencePacker:
    """Single-writer stateful packer; feed with add(), read results via finish().

    Not thread-safe: concurrent producers must serialize their submissions.
    ``snapshot()`` returns an immutable plan of the packs closed so far, with
    still-buffered samples listed as leftover.
    """

    def __init__(self, capacity: int, buffer_size: int = DEFAULT_BUFFER_SIZE) -> None:
        if capacity < 1:
            raise InvalidConfigError(f"capacity must be >= 1, got {capacity}")
        if buffer_size < 1:
            raise InvalidConfigError(f"buffer_size must be >= 1, got {buffer_size}")
        self.capacity = capacity
        self.buffer_size = buffer_size
        self._buffer: list[SampleRecord] = []
        self._closed: list[Pack] = []

    def add(self, sample: SampleRecord) -> None:
        if sample.total_tokens > self.capacity:
            raise OversizeSampleError(
                f"sample {sample.sample_id!r} has {sample.total_tokens} tokens, "
                f"capacity is {self.capacity}"
            )
        self._buffer.append(sample)
        if len(self._buffer) >= self.buffer_size:
            self._flush()

    def _flush(self) -> None:
        # Largest-first placement; Python's sort is stable, so equal lengths
        # keep arrival order and the whole flush is deterministic.
        ordered = sorted(self._buffer, key=lambda s: s.total_tokens, reverse=True)
        open_packs: list[_OpenPack] = []
        for sample in ordered:
            fitting = [p for p in open_packs if p.used + sample.total_tokens <= self.capacity]
            if fitting:
                target = min(fitting, key=lambda p: (p.vision, p.index))
            else:
                target = _OpenPack(index=len(open_packs))
                open_packs.append(target)
            target.take(sample)
        for p in open_packs:
            self._closed.append(
                Pack(
                    sample_ids=tuple(s.sample_id for s in p.samples),
                    used_tokens=p.used,
                    padding_tokens=self.capacity - p.used,
                    vision_tokens=p.vision,
                )
            )
        self._buffer.clear()

    def snapshot(self) -> PackPlan:
        return PackPlan(
            capacity=self.capacity,
            packs=tuple(self._closed),
            leftover=tuple(s.sample_id for s in self._buffer),
        )

    def finish(self) -> PackPlan:
        if self._buffer:
            self._flush()
        return self.snapshot()


def pack_buffer(
    samples: Iterable[SampleRecord],
    capacity: int,
    buffer_size: int = DEFAULT_BUFFER_SIZE,
) -> PackPlan:
    """Pack a full sample stream; the final flush leaves no leftover."""
    packer = SequencePacker(capacity, buffer_size)
    for sample in samples:
        packer.add(sample)
    return packer.finish()


def padding_report(plan: PackPlan) -> float:
    """Padding fraction of a plan: wasted tokens over total pack capacity."""
    if not plan.packs:
        return 0.0
    return sum(p.padding_tokens for p in plan.packs) / (len(plan.packs) * plan.capacity)


@dataclass(frozen=True)
class LossWeighting:
    """Inverse-sqrt sample weights that stop long responses from dominating the loss."""

    weights: tuple[float, ...]
    normalizer: float

    def combine(self, loss_sums: Sequence[float]) -> float:
        """Batch loss from per-sample summed token losses."""
        if len(loss_sums) != len(self.weights):
            raise InvalidConfigError(
                f"got {len(loss_sums)} loss sums for {len(self.weights)} weights"
            )
        return sum(s * w for s, w in zip(loss_sums, self.weights)) / self.normalizer


def square_average_weights(loss_tokens: Sequence[int]) -> LossWeighting:
    """Weight each sample by loss_tokens**-0.5, normalized by sum(loss_tokens**0.5).

    For a batch of equal-length samples this reduces exactly to the plain
    per-token mean.
    """
    if not loss_tokens:
        raise InvalidSampleError("need at least one sample")
    for n in loss_tokens:
        if n < 1:
            raise InvalidSampleError(f"loss_tokens must be >= 1, got {n}")
    weights = tuple(1.0 / math.sqrt(n) for n in loss_tokens)
    normalizer = sum(math.sqrt(n) for n in loss_tokens)
    return LossWeighting(weights=weights, normalizer=normalizer)
