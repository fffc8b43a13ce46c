"""Image tiling: aspect-ratio grid selection, token accounting, and tile slicing.

An input image is resized so that width and height are multiples of the tile
side, cut into a non-overlapping grid of square tiles, and optionally joined
by a single downscaled thumbnail tile that carries global context. Each tile
contributes a fixed token count determined by the patch size and the pixel
shuffle factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InputShapeError, InvalidConfigError


@dataclass(frozen=True)
class ImageDescriptor:
    """Pixel dimensions of an input image."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise InvalidConfigError(f"image dimensions must be >= 1, got {self.width}x{self.height}")


@dataclass(frozen=True)
class TilingConfig:
    """Geometry knobs for the tiling pipeline.

    ``tile_side`` must be divisible by ``patch_size``, and the pixel shuffle
    factor must divide the per-tile patch grid side, so every tile yields a
    whole number of output tokens.
    """

    tile_side: int = 512
    patch_size: int = 16
    max_tiles: int = 12
    pixel_shuffle_factor: int = 2
    include_thumbnail: bool = True

    def __post_init__(self) -> None:
        if self.tile_side < 1 or self.patch_size < 1:
            raise InvalidConfigError("tile_side and patch_size must be positive")
        if self.tile_side % self.patch_size != 0:
            raise InvalidConfigError(
                f"tile_side {self.tile_side} is not divisible by patch_size {self.patch_size}"
            )
        if self.max_tiles < 1:
            raise InvalidConfigError(f"max_tiles must be >= 1, got {self.max_tiles}")
        if self.pixel_shuffle_factor < 1:
            raise InvalidConfigError("pixel_shuffle_factor must be >= 1")
        if (self.tile_side // self.patch_size) % self.pixel_shuffle_factor != 0:
            raise InvalidConfigError(
                f"pixel_shuffle_factor {self.pixel_shuffle_factor} does not divide the "
                f"{self.tile_side // self.patch_size}-wide patch grid"
            )

    @property
    def patches_per_side(self) -> int:
        return self.tile_side // self.patch_size

    @property
    def tokens_per_tile(self) -> int:
        side = self.patches_per_side // self.pixel_shuffle_factor
        return side * side


@dataclass(frozen=True)
class TileLayout:
    """Chosen tile grid, resize target, and resulting token counts for one image."""

    grid_rows: int
    grid_cols: int
    resized_width: int
    resized_height: int
    has_thumbnail: bool
    tokens_per_tile: int
    total_tiles: int
    total_tokens: int


@lru_cache(maxsize=8)
def candidate_grids(max_tiles: int) -> tuple[tuple[int, int], ...]:
    """All (rows, cols) grids with 1 <= rows*cols <= max_tiles, in scan order.

    Scan order is ascending (tile count, rows, cols); the tie-break in
    :func:`select_grid` is defined relative to this order.
    """
    grids = [
        (rows, cols)
        for rows in range(1, max_tiles + 1)
        for cols in range(1, max_tiles + 1)
        if rows * cols <= max_tiles
    ]
    grids.sort(key=lambda rc: (rc[0] * rc[1], rc[0], rc[1]))
    return tuple(grids)


def select_grid(img: ImageDescriptor, cfg: TilingConfig = TilingConfig()) -> tuple[int, int]:
    """Pick the (rows, cols) grid whose cols/rows ratio is closest to width/height.

    Candidates are scanned in ascending (tile count, rows, cols) order and
    compared with exact integer arithmetic. When a candidate ties the current
    best on ratio distance, it wins only if the original image area exceeds
    half the candidate grid's pixel area; this keeps small images from being
    upscaled onto large grids while letting genuinely large images use more
    tiles.
    """
    w, h = img.width, img.height
    s2 = cfg.tile_side * cfg.tile_side
    grids = candidate_grids(cfg.max_tiles)

    best_rows, best_cols = grids[0]
    # distance(rows, cols) = |w/h - cols/rows| = |w*rows - cols*h| / (h*rows)
    best_num = abs(w * best_rows - best_cols * h)
    best_den = h * best_rows
    for rows, cols in grids[1:]:
        num = abs(w * rows - cols * h)
        den = h * rows
        lhs = num * best_den
        rhs = best_num * den
        if lhs < rhs or (lhs == rhs and 2 * w * h > rows * cols * s2):
            best_rows, best_cols, best_num, best_den = rows, cols, num, den
    return best_rows, best_cols


def layout_image(img: ImageDescriptor, cfg: TilingConfig = TilingConfig()) -> TileLayout:
    """Compute the full tile layout and token counts for an image.

    The thumbnail is suppressed when the grid is a single tile (it would
    duplicate that tile), and it does not count against ``max_tiles``.
    """
    rows, cols = select_grid(img, cfg)
    has_thumbnail = cfg.include_thumbnail and rows * cols > 1
    total_tiles = rows * cols + (1 if has_thumbnail else 0)
    tokens = cfg.tokens_per_tile
    return TileLayout(
        grid_rows=rows,
        grid_cols=cols,
        resized_width=cols * cfg.tile_side,
        resized_height=rows * cfg.tile_side,
        has_thumbnail=has_thumbnail,
        tokens_per_tile=tokens,
        total_tiles=total_tiles,
        total_tokens=total_tiles * tokens,
    )


def pixel_shuffle_map(grid_side: int, factor: int) -> list[tuple[tuple[int, int], ...]]:
    """Token grouping performed by pixel shuffle on a square token grid.

    Returns one entry per output token slot in row-major order. Output slot
    (i, j) covers the factor x factor input block ``(factor*i + a, factor*j + b)``
    with (a, b) enumerated row-major, so entry ``k`` describes output
    coordinates ``(k // out_side, k % out_side)``.
    """
    if grid_side < 1 or factor < 1:
        raise InvalidConfigError("grid_side and factor must be positive")
    if grid_side % factor != 0:
        raise InvalidConfigError(f"factor {factor} does not divide grid side {grid_side}")
    out_side = grid_side // factor
    mapping: list[tuple[tuple[int, int], ...]] = []
    for i in range(out_side):
        for j in range(out_side):
            mapping.append(
                tuple((factor * i + a, factor * j + b) for a in range(factor) for b in range(factor))
            )
    return mapping


def resize_bilinear(image: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers; uint8 in, uint8 out."""
    image = np.asarray(image)
    if image.ndim != 3:
        raise InputShapeError(f"expected (H, W, C) image, got shape {image.shape}")
    in_h, in_w = image.shape[:2]
    if (in_h, in_w) == (out_height, out_width):
        return image.copy()

    src_y = (np.arange(out_height, dtype=np.float64) + 0.5) * (in_h / out_height) - 0.5
    src_x = (np.arange(out_width, dtype=np.float64) + 0.5) * (in_w / out_width) - 0.5
    src_y = np.clip(src_y, 0.0, in_h - 1.0)
    src_x = np.clip(src_x, 0.0, in_w - 1.0)

    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (src_y - y0)[:, None, None]
    wx = (src_x - x0)[None, :, None]

    data = image.astype(np.float64)
    top = data[y0][:, x0] * (1.0 - wx) + data[y0][:, x1] * wx
    bottom = data[y1][:, x0] * (1.0 - wx) + data[y1][:, x1] * wx
    blended = top * (1.0 - wy) + bottom * wy

    if image.dtype == np.uint8:
        return np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    return blended.astype(image.dtype)


def slice_tiles(frame: np.ndarray, layout: TileLayout) -> list[np.ndarray]:
    """Cut a resized frame into its layout's tiles, row-major, thumbnail last.

    The frame must already match the layout's resize target; the thumbnail,
    when present, is the whole frame resized down to one tile.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3:
        raise InputShapeError(f"expected (H, W, C) frame, got shape {frame.shape}")
    height, width = frame.shape[:2]
    if (height, width) != (layout.resized_height, layout.resized_width):
        raise InputShapeError(
            f"frame is {width}x{height}, layout expects "
            f"{layout.resized_width}x{layout.resized_height}"
        )
    side = layout.resized_width // layout.grid_cols
    tiles = [
        frame[r * side:(r + 1) * side, c * side:(c + 1) * side].copy()
        for r in range(layout.grid_rows)
        for c in range(layout.grid_cols)
    ]
    if layout.has_thumbnail:
        tiles.append(resize_bilinear(frame, side, side))
    return tiles
