"""Deterministic multimodal input-pipeline toolkit.

Covers the token-level machinery around a vision-language model: image
tiling and pixel-shuffle token reduction, video frame sampling, temporal
patch pruning, balance-aware sequence packing, reasoning-budget control,
context-parallel shard planning, and low-precision quantization simulation.
Everything is a pure function of its inputs and reproducible byte for byte.
"""

from .budget import (
    Action,
    BudgetConfig,
    BudgetState,
    BudgetSummary,
    Phase,
    TraceToken,
    budget_sweep,
    filter_stream,
    on_token,
)
from .errors import (
    CalibrationDataError,
    DegenerateTensorError,
    InputShapeError,
    InvalidConfigError,
    InvalidSampleError,
    IOFailureError,
    MMTokError,
    OversizeSampleError,
    ProtocolError,
    SchemaError,
)
from .evs import (
    ChangeMetric,
    PatchGrid,
    PruneMask,
    apply_mask,
    change_scores,
    prunable_drop_count,
    prune,
)
from .packing import (
    LossWeighting,
    Pack,
    PackPlan,
    SampleRecord,
    SequencePacker,
    pack_buffer,
    padding_report,
    square_average_weights,
)
from .planner import (
    STAGE_MAX_LENGTHS,
    FitReport,
    PromptSpec,
    ShardPlan,
    TokenAccount,
    VideoRequest,
    account_tokens,
    fits_stage,
    gather_tiles,
    plan_shards,
)
from .quant import (
    CalibrationAccumulator,
    QuantErrorReport,
    QuantFormat,
    QuantSpec,
    e4m3_dequantize,
    e4m3_quantize,
    e4m3_roundtrip,
    e4m3_value,
    finalize_scale,
    nvfp4_dequantize_block,
    nvfp4_dequantize_tensor,
    nvfp4_quantize_block,
    nvfp4_quantize_tensor,
    quant_error_report,
    quantize_dequantize,
)
from .tiling import (
    ImageDescriptor,
    TileLayout,
    TilingConfig,
    layout_image,
    pixel_shuffle_map,
    resize_bilinear,
    select_grid,
    slice_tiles,
)
from .video import (
    FramePlan,
    SamplingMode,
    VideoDescriptor,
    frame_token_count,
    plan_frames,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BudgetConfig",
    "BudgetState",
    "BudgetSummary",
    "CalibrationAccumulator",
    "CalibrationDataError",
    "ChangeMetric",
    "DegenerateTensorError",
    "FitReport",
    "FramePlan",
    "ImageDescriptor",
    "InputShapeError",
    "InvalidConfigError",
    "InvalidSampleError",
    "IOFailureError",
    "LossWeighting",
    "MMTokError",
    "OversizeSampleError",
    "Pack",
    "PackPlan",
    "PatchGrid",
    "Phase",
    "PromptSpec",
    "ProtocolError",
    "PruneMask",
    "QuantErrorReport",
    "QuantFormat",
    "QuantSpec",
    "STAGE_MAX_LENGTHS",
    "SampleRecord",
    "SamplingMode",
    "SchemaError",
    "SequencePacker",
    "ShardPlan",
    "TileLayout",
    "TilingConfig",
    "TokenAccount",
    "TraceToken",
    "VideoDescriptor",
    "VideoRequest",
    "account_tokens",
    "apply_mask",
    "budget_sweep",
    "change_scores",
    "e4m3_dequantize",
    "e4m3_quantize",
    "e4m3_roundtrip",
    "e4m3_value",
    "filter_stream",
    "finalize_scale",
    "fits_stage",
    "frame_token_count",
    "gather_tiles",
    "layout_image",
    "nvfp4_dequantize_block",
    "nvfp4_dequantize_tensor",
    "nvfp4_quantize_block",
    "nvfp4_quantize_tensor",
    "on_token",
    "pack_buffer",
    "padding_report",
    "pixel_shuffle_map",
    "plan_frames",
    "plan_shards",
    "prunable_drop_count",
    "prune",
    "quant_error_report",
    "quantize_dequantize",
    "resize_bilinear",
    "select_grid",
    "slice_tiles",
    "square_average_weights",
]
