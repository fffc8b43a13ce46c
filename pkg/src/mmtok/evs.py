"""Temporal patch pruning for video token streams.

Patches that change little between consecutive frames are scored low and
dropped globally across all frames except the first, which is always kept in
full. Kept tokens retain their original (frame, row, col) identity so the
downstream consumer needs no architectural changes.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Iterable, Sequence

import numpy as np

from .errors import InputShapeError, InvalidConfigError


class ChangeMetric(enum.Enum):
    MEAN_ABS_DIFF = "mad"
    COSINE = "cosine"


@dataclass(frozen=True)
class PatchGrid:
    """A (frames, rows, cols) lattice of patch payloads.

    ``values`` has shape (F, R, C, ...) where the trailing axes form the
    payload: a raw pixel block or an embedding vector. All patches share one
    payload shape by construction.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim < 3:
            raise InputShapeError(
                f"patch grid needs at least (frames, rows, cols), got shape {self.values.shape}"
            )
        if self.values.shape[0] < 1:
            raise InputShapeError("patch grid needs at least one frame")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def rows(self) -> int:
        return self.values.shape[1]

    @property
    def cols(self) -> int:
        return self.values.shape[2]

    def payload_matrix(self) -> np.ndarray:
        """Payloads flattened to (F, R, C, D) float64."""
        f, r, c = self.values.shape[:3]
        return self.values.reshape(f, r, c, -1).astype(np.float64)

    @classmethod
    def from_frames(cls, frames: Sequence[np.ndarray], patch_size: int = 16) -> "PatchGrid":
        """Cut equally sized (H, W, C) frames into patch_size pixel blocks."""
        if patch_size < 1:
            raise InvalidConfigError(f"patch_size must be >= 1, got {patch_size}")
        if not frames:
            raise InputShapeError("need at least one frame")
        stack = np.stack([np.asarray(f) for f in frames])
        if stack.ndim != 4:
            raise InputShapeError("frames must all be (H, W, C) arrays of one shape")
        n, height, width, channels = stack.shape
        if height % patch_size or width % patch_size:
            raise InputShapeError(
                f"frame size {width}x{height} is not divisible by patch_size {patch_size}"
            )
        rows, cols = height // patch_size, width // patch_size
        lattice = (
            stack.reshape(n, rows, patch_size, cols, patch_size, channels)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(n, rows, cols, patch_size * patch_size * channels)
        )
        return cls(values=lattice)


@dataclass(frozen=True)
class PruneMask:
    """Keep/drop decision per (frame, row, col) with the surviving position ids."""

    keep: np.ndarray                 # bool, shape (F, R, C)
    kept_positions: np.ndarray       # int64, shape (N, 3), sorted by (frame, row, col)
    prune_ratio: float

    @property
    def dropped_count(self) -> int:
        return int(self.keep.size - self.keep.sum())

    def kept_per_frame(self) -> list[int]:
        return [int(n) for n in self.keep.reshape(self.keep.shape[0], -1).sum(axis=1)]

    def packed_bits(self) -> bytes:
        """Bit-packed keep flags, frame-major row-major."""
        return np.packbits(self.keep.reshape(-1)).tobytes()


def prunable_drop_count(frames: int, rows: int, cols: int, ratio: float) -> int:
    """floor(ratio * prunable patches), exact for the given float ratio.

    Prunable patches are everything outside frame 0: (frames - 1) * rows * cols.
    """
    if not 0.0 <= ratio <= 1.0:
        raise InvalidConfigError(f"prune ratio must be in [0, 1], got {ratio}")
    prunable = (frames - 1) * rows * cols
    return floor(Fraction(ratio) * prunable)


def _frame_pair_score(prev: np.ndarray, curr: np.ndarray, metric: ChangeMetric) -> np.ndarray:
    if metric is ChangeMetric.MEAN_ABS_DIFF:
        return np.abs(curr - prev).mean(axis=-1)
    # cosine dissimilarity; zero vectors compare equal to each other only
    dot = (curr * prev).sum(axis=-1)
    norm_prev = np.linalg.norm(prev, axis=-1)
    norm_curr = np.linalg.norm(curr, axis=-1)
    denom = norm_prev * norm_curr
    both_zero = (norm_prev == 0) & (norm_curr == 0)
    one_zero = (denom == 0) & ~both_zero
    safe = np.where(denom == 0, 1.0, denom)
    similarity = np.where(both_zero, 1.0, np.where(one_zero, 0.0, dot / safe))
    return 1.0 - np.clip(similarity, -1.0, 1.0)


def change_scores(
    grid: PatchGrid,
    metric: ChangeMetric = ChangeMetric.MEAN_ABS_DIFF,
    threads: int = 1,
) -> np.ndarray:
    """Per-patch change score between consecutive frames, shape (F-1, R, C).

    A single frame yields an empty score array. Scoring is independent per
    frame pair, so it may run under a thread pool; results are written by
    index and the output does not depend on scheduling.
    """
    payload = grid.payload_matrix()
    if grid.frames == 1:
        return np.zeros((0, grid.rows, grid.cols), dtype=np.float64)
    if threads <= 1 or grid.frames == 2:
        return _frame_pair_score(payload[:-1], payload[1:], metric)

    out = np.empty((grid.frames - 1, grid.rows, grid.cols), dtype=np.float64)

    def score_pair(f: int) -> None:
        out[f] = _frame_pair_score(payload[f], payload[f + 1], metric)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(score_pair, range(grid.frames - 1)))
    return out


def prune(
    grid: PatchGrid,
    ratio: float,
    metric: ChangeMetric = ChangeMetric.MEAN_ABS_DIFF,
    threads: int = 1,
) -> PruneMask:
    """Drop the lowest-scoring prunable patches globally across frames 1..F-1.

    Exactly floor(ratio * (F-1) * R * C) patches are dropped. Score ties are
    broken by ascending (frame, row, col), so earlier coordinates drop first
    and masks are reproducible. Frame 0 is never pruned.
    """
    n_drop = prunable_drop_count(grid.frames, grid.rows, grid.cols, ratio)
    keep = np.ones((grid.frames, grid.rows, grid.cols), dtype=bool)
    if n_drop:
        scores = change_scores(grid, metric, threads=threads).reshape(-1)
        f_idx, r_idx, c_idx = np.indices((grid.frames - 1, grid.rows, grid.cols)).reshape(3, -1)
        # lexsort: last key is primary, so order is (score, frame, row, col) ascending
        order = np.lexsort((c_idx, r_idx, f_idx, scores))
        victims = order[:n_drop]
        keep[f_idx[victims] + 1, r_idx[victims], c_idx[victims]] = False
    kept_positions = np.argwhere(keep).astype(np.int64)
    return PruneMask(keep=keep, kept_positions=kept_positions, prune_ratio=ratio)


def apply_mask(
    tokens: Iterable[tuple[tuple[int, int, int], object]],
    mask: PruneMask,
) -> list[tuple[tuple[int, int, int], object]]:
    """Filter an ordered token sequence down to the mask's kept positions.

    Tokens are ((frame, row, col), payload) pairs whose ids must cover the
    mask's lattice exactly once each. Relative order and ids are preserved.
    """
    token_list = list(tokens)
    lattice = mask.keep.shape
    expected = lattice[0] * lattice[1] * lattice[2]
    if len(token_list) != expected:
        raise InputShapeError(f"got {len(token_list)} tokens for a {expected}-patch lattice")
    seen: set[tuple[int, int, int]] = set()
    for position, _ in token_list:
        f, r, c = position
        if not (0 <= f < lattice[0] and 0 <= r < lattice[1] and 0 <= c < lattice[2]):
            raise InputShapeError(f"token id {position} outside lattice {lattice}")
        if position in seen:
            raise InputShapeError(f"duplicate token id {position}")
        seen.add(position)
    return [(pos, payload) for pos, payload in token_list if mask.keep[pos]]
