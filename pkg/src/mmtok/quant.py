"""Bit-exact simulation of 8-bit E4M3 and 4-bit block-scaled numeric formats.

E4M3 here is the finite-only convention: 4 exponent bits (bias 7), 3 mantissa
bits, no infinities, a single NaN bit pattern per sign, and a maximum finite
magnitude of 448. The 4-bit block format stores E2M1 elements (codebook
0, 0.5, 1, 1.5, 2, 3, 4, 6 and negatives) in fixed-size blocks, each block
carrying an E4M3-coded scale on top of one per-tensor scale.

Calibration follows the static per-tensor recipe: track the absolute maximum
over a calibration set and divide by the format's representable maximum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    CalibrationDataError,
    DegenerateTensorError,
    InputShapeError,
    InvalidConfigError,
)

E4M3_MAX = 448.0
E4M3_MIN_EXP = -6          # smallest normal exponent; subnormal step is 2**(-9)
E4M3_MANT_BITS = 3
E4M3_MIN_SUBNORMAL = 2.0 ** (E4M3_MIN_EXP - E4M3_MANT_BITS)

FP4_MAX = 6.0
FP4_MIN_EXP = 0            # E2M1: subnormal step is 0.5
FP4_MANT_BITS = 1
FP4_CODEBOOK = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0)

DEFAULT_BLOCK_SIZE = 16
NVFP4_TENSOR_MAX = FP4_MAX * E4M3_MAX   # per-tensor stage headroom: 6 * 448


class QuantFormat(enum.Enum):
    E4M3 = "e4m3"
    NVFP4 = "nvfp4"

    @property
    def format_max(self) -> float:
        return E4M3_MAX if self is QuantFormat.E4M3 else NVFP4_TENSOR_MAX


def _round_to_grid(magnitudes: np.ndarray, mant_bits: int, min_exp: int, max_value: float) -> np.ndarray:
    """Round non-negative magnitudes to the nearest grid value, half to even.

    The grid is a miniature float format: normals (1 + m/2**mant_bits) * 2**e
    for e >= min_exp, subnormals in steps of 2**(min_exp - mant_bits), and
    saturation at max_value. All intermediate products are exact in float64,
    so ties are detected exactly.
    """
    mantissa, exponent = np.frexp(magnitudes)
    del mantissa
    exp = np.maximum(exponent - 1, min_exp)          # floor(log2 a), clamped
    quantum = np.ldexp(1.0, exp - mant_bits)
    steps = np.rint(magnitudes / quantum)            # exact division by a power of two
    values = steps * quantum
    return np.where(magnitudes >= max_value, max_value, values)


def _encode_e4m3(values: np.ndarray, negative: np.ndarray, nan_mask: np.ndarray) -> np.ndarray:
    """Bit-pack exactly representable magnitudes (with sign flags) into codes."""
    codes = np.zeros(values.shape, dtype=np.uint8)
    subnormal = values < 2.0 ** E4M3_MIN_EXP
    # subnormals (and zero): exponent field 0, mantissa = value / 2**-9
    codes[subnormal] = np.rint(values[subnormal] * 2.0 ** 9).astype(np.uint8)
    normal = ~subnormal
    if normal.any():
        _, exponent = np.frexp(values[normal])
        exp = exponent - 1
        mant = np.rint(values[normal] / np.ldexp(1.0, exp) * 8.0).astype(np.uint8) - 8
        codes[normal] = ((exp + 7).astype(np.uint8) << 3) | mant
    codes[nan_mask] = 0x7F
    codes |= (negative.astype(np.uint8) << 7)
    return codes


def e4m3_quantize(x, scale: float):
    """Quantize real values to 8-bit E4M3 codes of x / scale.

    Magnitudes at or beyond 448 saturate to the signed maximum; rounding is
    half to even among representable values; NaN inputs map to the NaN code
    with their sign bit preserved. Scalar in, scalar (int) out; arrays come
    back as uint8 arrays.
    """
    if scale <= 0:
        raise InvalidConfigError(f"scale must be positive, got {scale}")
    arr = np.asarray(x, dtype=np.float64)
    scaled = np.atleast_1d(arr) / scale
    nan_mask = np.isnan(scaled)
    negative = np.signbit(scaled)
    magnitudes = np.abs(np.where(nan_mask, 0.0, scaled))
    values = _round_to_grid(magnitudes, E4M3_MANT_BITS, E4M3_MIN_EXP, E4M3_MAX)
    codes = _encode_e4m3(values, negative, nan_mask)
    if arr.ndim == 0:
        return int(codes[0])
    return codes.reshape(arr.shape)


def e4m3_value(code) -> np.ndarray | float:
    """Decode E4M3 codes to their real values (scale 1)."""
    codes = np.asarray(code, dtype=np.uint8)
    sign = np.where(codes & 0x80, -1.0, 1.0)
    exp_field = ((codes >> 3) & 0x0F).astype(np.int64)
    mant = (codes & 0x07).astype(np.float64)
    subnormal = mant * 2.0 ** (E4M3_MIN_EXP - E4M3_MANT_BITS)
    normal = np.ldexp(1.0 + mant / 8.0, exp_field - 7)
    values = np.where(exp_field == 0, subnormal, normal)
    values = np.where((exp_field == 15) & (mant == 7), np.nan, values)
    out = sign * values
    if np.isscalar(code) or np.asarray(code).ndim == 0:
        return float(out)
    return out


def e4m3_dequantize(code, scale: float):
    """Real value of an E4M3 code under a per-tensor scale."""
    if scale <= 0:
        raise InvalidConfigError(f"scale must be positive, got {scale}")
    return e4m3_value(code) * scale


def e4m3_roundtrip(x, scale: float):
    """dequantize(quantize(x)) in one step."""
    return e4m3_dequantize(e4m3_quantize(x, scale), scale)


def fp4_quantize_values(x) -> np.ndarray:
    """Round values onto the signed E2M1 codebook (0, 0.5, 1, 1.5, 2, 3, 4, 6)."""
    arr = np.asarray(x, dtype=np.float64)
    negative = np.signbit(arr)
    values = _round_to_grid(np.abs(arr), FP4_MANT_BITS, FP4_MIN_EXP, FP4_MAX)
    return np.where(negative, -values, values)


def _encode_fp4(values: np.ndarray) -> np.ndarray:
    """Pack codebook values into 4-bit codes: sign(1) exp(2) mantissa(1)."""
    codes = np.zeros(values.shape, dtype=np.uint8)
    mag = np.abs(values)
    for i, v in enumerate(FP4_CODEBOOK):
        codes[mag == v] = i
    codes |= np.signbit(values).astype(np.uint8) << 3
    return codes


def _decode_fp4(codes: np.ndarray) -> np.ndarray:
    table = np.asarray(FP4_CODEBOOK, dtype=np.float64)
    mag = table[codes & 0x07]
    return np.where(codes & 0x08, -mag, mag)


@dataclass(frozen=True)
class QuantizedBlock:
    """One block's 4-bit element codes plus its E4M3 scale code."""

    scale_code: int
    element_codes: np.ndarray      # uint8, one 4-bit code per element


def nvfp4_quantize_block(xs, per_tensor_scale: float) -> QuantizedBlock:
    """Quantize one block: E4M3-coded block scale plus E2M1 element codes.

    The block scale targets block_amax / 6 / per_tensor_scale so the largest
    element lands on the top codebook entry. An all-zero block (or one whose
    scale would underflow to zero) uses the smallest positive E4M3 subnormal
    so zeros still round-trip exactly.
    """
    if per_tensor_scale <= 0:
        raise InvalidConfigError(f"per_tensor_scale must be positive, got {per_tensor_scale}")
    block = np.asarray(xs, dtype=np.float64).reshape(-1)
    if block.size < 1:
        raise InputShapeError("block must contain at least one value")
    if not np.isfinite(block).all():
        raise CalibrationDataError("block contains non-finite values")
    amax = float(np.abs(block).max())
    scale_code = e4m3_quantize(amax / FP4_MAX / per_tensor_scale, 1.0) if amax > 0 else 0
    if e4m3_value(scale_code) == 0.0:
        scale_code = 0x01       # smallest positive subnormal, 2**-9
    block_scale = float(e4m3_value(scale_code))
    elements = fp4_quantize_values(block / (block_scale * per_tensor_scale))
    return QuantizedBlock(scale_code=int(scale_code), element_codes=_encode_fp4(elements))


def nvfp4_dequantize_block(block: QuantizedBlock, per_tensor_scale: float) -> np.ndarray:
    """Reconstruct a block's real values."""
    if per_tensor_scale <= 0:
        raise InvalidConfigError(f"per_tensor_scale must be positive, got {per_tensor_scale}")
    scale = float(e4m3_value(block.scale_code)) * per_tensor_scale
    return _decode_fp4(np.asarray(block.element_codes, dtype=np.uint8)) * scale


def nvfp4_quantize_tensor(
    x, per_tensor_scale: float, block_size: int = DEFAULT_BLOCK_SIZE
) -> list[QuantizedBlock]:
    """Quantize a flat tensor block by block; length must be a block multiple."""
    if block_size < 1:
        raise InvalidConfigError(f"block_size must be >= 1, got {block_size}")
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size % block_size != 0:
        raise InputShapeError(
            f"tensor of {arr.size} values is not divisible into blocks of {block_size}"
        )
    return [
        nvfp4_quantize_block(arr[i:i + block_size], per_tensor_scale)
        for i in range(0, arr.size, block_size)
    ]


def nvfp4_dequantize_tensor(blocks: Iterable[QuantizedBlock], per_tensor_scale: float) -> np.ndarray:
    parts = [nvfp4_dequantize_block(b, per_tensor_scale) for b in blocks]
    if not parts:
        return np.zeros(0, dtype=np.float64)
    return np.concatenate(parts)


@dataclass
class CalibrationAccumulator:
    """Running absolute maximum over a calibration stream; order-insensitive."""

    running_amax: float = 0.0
    samples_seen: int = 0

    def observe(self, tensor) -> "CalibrationAccumulator":
        arr = np.asarray(tensor, dtype=np.float64)
        if arr.size and not np.isfinite(arr).all():
            raise CalibrationDataError("calibration tensor contains NaN or Inf")
        if arr.size:
            self.running_amax = max(self.running_amax, float(np.abs(arr).max()))
        self.samples_seen += 1
        return self

    def merge(self, other: "CalibrationAccumulator") -> "CalibrationAccumulator":
        """Max-combine two shards calibrated in parallel."""
        return CalibrationAccumulator(
            running_amax=max(self.running_amax, other.running_amax),
            samples_seen=self.samples_seen + other.samples_seen,
        )


def finalize_scale(acc: CalibrationAccumulator, fmt: QuantFormat) -> float:
    """Static per-tensor scale: observed amax over the format maximum."""
    if acc.samples_seen < 1:
        raise InvalidConfigError("cannot finalize a scale before any observations")
    if acc.running_amax <= 0.0:
        raise DegenerateTensorError("amax is zero; scale is undefined for an all-zero tensor")
    return acc.running_amax / fmt.format_max


@dataclass(frozen=True)
class QuantSpec:
    """Numeric format descriptor with its calibrated scales."""

    format: QuantFormat
    per_tensor_scale: float
    block_size: int = DEFAULT_BLOCK_SIZE
    per_block_scales: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.per_tensor_scale <= 0:
            raise InvalidConfigError(
                f"per_tensor_scale must be positive, got {self.per_tensor_scale}"
            )
        if self.format is QuantFormat.NVFP4 and self.block_size < 1:
            raise InvalidConfigError(f"block_size must be >= 1, got {self.block_size}")


@dataclass(frozen=True)
class QuantErrorReport:
    max_abs_err: float
    mse: float
    saturation_count: int


def quantize_dequantize(tensor, spec: QuantSpec) -> np.ndarray:
    """Full fake-quantization pass under a spec."""
    arr = np.asarray(tensor, dtype=np.float64).reshape(-1)
    if spec.format is QuantFormat.E4M3:
        return np.asarray(e4m3_roundtrip(arr, spec.per_tensor_scale))
    blocks = nvfp4_quantize_tensor(arr, spec.per_tensor_scale, spec.block_size)
    return nvfp4_dequantize_tensor(blocks, spec.per_tensor_scale)


def quant_error_report(tensor, spec: QuantSpec) -> QuantErrorReport:
    """Deterministic reconstruction-error statistics of a fake-quantization pass."""
    arr = np.asarray(tensor, dtype=np.float64).reshape(-1)
    if arr.size and not np.isfinite(arr).all():
        raise CalibrationDataError("tensor contains NaN or Inf")
    if arr.size == 0:
        return QuantErrorReport(max_abs_err=0.0, mse=0.0, saturation_count=0)
    recon = quantize_dequantize(arr, spec)
    err = recon - arr
    if spec.format is QuantFormat.E4M3:
        saturated = np.abs(arr / spec.per_tensor_scale) > E4M3_MAX
    else:
        blocks = nvfp4_quantize_tensor(arr, spec.per_tensor_scale, spec.block_size)
        limits = np.repeat(
            [float(e4m3_value(b.scale_code)) * spec.per_tensor_scale * FP4_MAX for b in blocks],
            spec.block_size,
        )
        saturated = np.abs(arr) > limits
    return QuantErrorReport(
        max_abs_err=float(np.abs(err).max()),
        mse=float(np.mean(err * err)),
        saturation_count=int(saturated.sum()),
    )
