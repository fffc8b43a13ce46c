"""Independent oracle implementations used to cross-check the library.

Everything here is deliberately written from the contract, not from the
library code: brute-force enumeration, exhaustive search, and scalar loops.
Keep these slow and obvious.
"""

from __future__ import annotations

import math
from fractions import Fraction


# ---------------------------------------------------------------------------
# tiling: exhaustive grid enumeration with exact rational distances


def oracle_select_grid(
    width: int, height: int, max_tiles: int = 12, tile_side: int = 512
) -> tuple[int, int]:
    """Enumerate every admissible grid, filter to minimal ratio distance,
    then resolve ties with the documented area rule in scan order."""
    target = Fraction(width, height)
    grids = sorted(
        (
            (rows, cols)
            for rows in range(1, max_tiles + 1)
            for cols in range(1, max_tiles + 1)
            if rows * cols <= max_tiles
        ),
        key=lambda rc: (rc[0] * rc[1], rc[0], rc[1]),
    )
    distances = {g: abs(target - Fraction(g[1], g[0])) for g in grids}
    minimum = min(distances.values())
    tied = [g for g in grids if distances[g] == minimum]
    pick = tied[0]
    for rows, cols in tied[1:]:
        if Fraction(width * height) > Fraction(rows * cols * tile_side * tile_side, 2):
            pick = (rows, cols)
    return pick


# ---------------------------------------------------------------------------
# evs: scalar mean-absolute-difference scoring and sort-and-cut selection


def oracle_mad_scores(values) -> dict[tuple[int, int, int], float]:
    """Per-patch mean absolute difference against the previous frame."""
    frames = len(values)
    rows = len(values[0])
    cols = len(values[0][0])
    scores: dict[tuple[int, int, int], float] = {}
    for f in range(1, frames):
        for r in range(rows):
            for c in range(cols):
                curr = values[f][r][c]
                prev = values[f - 1][r][c]
                total = sum(abs(float(a) - float(b)) for a, b in zip(curr, prev))
                scores[(f, r, c)] = total / len(curr)
    return scores


def oracle_drop_set(scores: dict[tuple[int, int, int], float], n_drop: int) -> set:
    """Full sort of every prunable patch by (score, frame, row, col); cut the head."""
    ordered = sorted(scores.items(), key=lambda kv: (kv[1], kv[0]))
    return {pos for pos, _ in ordered[:n_drop]}


# ---------------------------------------------------------------------------
# packing: FIFO baseline and exhaustive minimal bin count


def fifo_pack_counts(lengths: list[int], capacity: int) -> list[int]:
    """Naive sequential packer: fill the current bin, open a new one on overflow."""
    bins: list[int] = []
    current = 0
    for n in lengths:
        if current + n > capacity:
            bins.append(current)
            current = 0
        current += n
    if current:
        bins.append(current)
    return bins


def fifo_padding_fraction(lengths: list[int], capacity: int) -> float:
    bins = fifo_pack_counts(lengths, capacity)
    if not bins:
        return 0.0
    return sum(capacity - b for b in bins) / (len(bins) * capacity)


def optimal_bin_count(lengths: list[int], capacity: int) -> int:
    """Exact minimal number of bins by dynamic programming over subsets."""
    n = len(lengths)
    if n == 0:
        return 0
    assert n <= 16, "exhaustive oracle is for small instances"
    full = (1 << n) - 1
    subset_sum = [0] * (1 << n)
    for mask in range(1, 1 << n):
        low = mask & -mask
        subset_sum[mask] = subset_sum[mask ^ low] + lengths[low.bit_length() - 1]
    INF = n + 1
    best = [INF] * (1 << n)
    best[0] = 0
    for mask in range(1, 1 << n):
        sub = mask
        while sub:
            if subset_sum[sub] <= capacity:
                candidate = best[mask ^ sub] + 1
                if candidate < best[mask]:
                    best[mask] = candidate
            sub = (sub - 1) & mask
    return best[full]


# ---------------------------------------------------------------------------
# budget: independent counter-based replay


def oracle_budget_replay(
    thinking_total: int, budget: int, grace: int
) -> tuple[int, bool]:
    """(thinking tokens kept, forced?) for a single-block trace."""
    if budget == 0:
        return thinking_total, False
    limit = budget + grace - 1
    if thinking_total > limit:
        return limit, True
    return thinking_total, False


# ---------------------------------------------------------------------------
# quant: scalar reference E4M3 built directly from the format definition


def e4m3_magnitudes() -> list[tuple[float, int]]:
    """All non-negative finite E4M3 magnitudes with their mantissa bits."""
    out = []
    for e in range(16):
        for m in range(8):
            if e == 15 and m == 7:
                continue  # NaN pattern
            if e == 0:
                value = (m / 8.0) * 2.0 ** -6
            else:
                value = (1.0 + m / 8.0) * 2.0 ** (e - 7)
            out.append((value, m))
    return sorted(set(out))


_E4M3_MAGNITUDES = e4m3_magnitudes()


def scalar_e4m3_nearest(x: float) -> float:
    """Nearest representable value, ties to even mantissa, saturating at 448."""
    if x != x:  # NaN
        return float("nan")
    sign = math.copysign(1.0, x)
    a = abs(x)
    if a >= 448.0:
        return sign * 448.0
    best_value, best_dist, best_mant = None, None, None
    for value, mant in _E4M3_MAGNITUDES:
        dist = abs(a - value)
        if best_dist is None or dist < best_dist:
            best_value, best_dist, best_mant = value, dist, mant
        elif dist == best_dist and mant % 2 == 0 and best_mant % 2 == 1:
            best_value, best_mant = value, mant
    return sign * best_value


def scalar_fp4_nearest(x: float) -> float:
    """Nearest signed codebook entry with ties to even mantissa."""
    codebook = [(0.0, 0), (0.5, 1), (1.0, 0), (1.5, 1), (2.0, 0), (3.0, 1), (4.0, 0), (6.0, 1)]
    sign = -1.0 if x < 0 else 1.0
    a = abs(x)
    if a >= 6.0:
        return sign * 6.0
    best_value, best_dist, best_mant = None, None, None
    for value, mant in codebook:
        dist = abs(a - value)
        if best_dist is None or dist < best_dist:
            best_value, best_dist, best_mant = value, dist, mant
        elif dist == best_dist and mant % 2 == 0 and best_mant % 2 == 1:
            best_value, best_mant = value, mant
    return sign * best_value
