"""
Similarity metrics module for the brainmatch pipeline.

Volumetric similarity between a candidate volume f and a template t:
sum of squared differences (at zero or any integer offset), zero-normalized
cross-correlation, and the Dice coefficient of thresholded masks. The
partitioned_* variants compute the same values voxel by voxel through the
partitioned dataset engine.
"""

import logging
import math
import operator
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from brainmatch.nifti_io import Volume
from brainmatch.pardata import ExecutionConfig, PartitionedDataset

# Configure logging
logger = logging.getLogger(__name__)


class MetricError(Exception):
    """Base class for metric failures."""

    pass


class DimMismatch(MetricError):
    """Raised when a candidate's extents differ from the template's."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class ZeroVariance(MetricError):
    """Raised when a normalization needs a non-constant volume."""

    pass


class MetricKind(str, Enum):
    SSD = "ssd"
    NCC = "ncc"
    DICE = "dice"

    @property
    def lower_is_better(self) -> bool:
        return self is MetricKind.SSD

    @property
    def direction(self) -> str:
        return "lower-is-better" if self.lower_is_better else "higher-is-better"

    def better(self, a: float, b: float) -> bool:
        """True if score a beats score b under this metric's direction."""
        return a < b if self.lower_is_better else a > b


@dataclass(frozen=True)
class Offset:
    """Integer voxel translation of the template (u, v, w)."""

    u: int = 0
    v: int = 0
    w: int = 0


@dataclass(frozen=True, eq=False)
class Template:
    """Network template volume plus the threshold that binarizes it for Dice."""

    volume: Volume
    mask_threshold: float = 0.5

    def __post_init__(self):
        if not math.isfinite(self.mask_threshold):
            raise ValueError(f"mask_threshold must be finite, got: {self.mask_threshold}")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.volume.shape


def check_dims(f: Volume, t: Template, index: Optional[int] = None) -> None:
    """
    Raises:
        DimMismatch: If f and the template differ in extents
    """
    if f.shape != t.shape:
        where = f" (component {index})" if index is not None else ""
        raise DimMismatch(
            f"Volume {f.label!r}{where} has dims {f.shape}, template has {t.shape}",
            index=index,
        )


def _sum_squares(diff: np.ndarray) -> float:
    return float(np.sum(diff * diff))


def _require_variance(v: Volume) -> None:
    if v.voxel_count == 0 or np.ptp(v.data) == 0:
        raise ZeroVariance(f"Volume {v.label!r} is constant")


def ssd(f: Volume, t: Template) -> float:
    """
    Sum of squared differences at zero offset: sum over voxels of (f - t)^2.

    Raises:
        DimMismatch: If dims differ
    """
    check_dims(f, t)
    return _sum_squares(f.data - t.volume.data)


def _overlap(size: int, shift: int) -> Tuple[slice, slice]:
    # f index x pairs with template index x - shift
    start, stop = max(0, shift), min(size, size + shift)
    return slice(start, stop), slice(start - shift, stop - shift)


def ssd_at_offset(f: Volume, t: Template, off: Offset) -> float:
    """
    SSD of f(x, y, z) against t(x - u, y - v, z - w).

    Only voxels whose shifted template index is in bounds contribute; an
    empty overlap gives 0.0. The zero offset equals ssd() exactly.

    Raises:
        DimMismatch: If dims differ
    """
    check_dims(f, t)
    shifts = (off.u, off.v, off.w)
    if any(abs(s) >= n for s, n in zip(shifts, f.shape)):
        return 0.0
    pairs = [_overlap(n, s) for n, s in zip(f.shape, shifts)]
    f_idx = tuple(p[0] for p in pairs)
    t_idx = tuple(p[1] for p in pairs)
    diff = f.array()[f_idx] - t.volume.array()[t_idx]
    # x-fastest ravel keeps the summation order of ssd()
    return _sum_squares(np.ravel(diff, order="F"))


def ncc(f: Volume, t: Template) -> float:
    """
    Zero-normalized (Pearson) cross-correlation, in [-1, 1].

    Raises:
        DimMismatch: If dims differ
        ZeroVariance: If either volume is constant
    """
    check_dims(f, t)
    _require_variance(f)
    _require_variance(t.volume)
    a = f.data - f.data.mean()
    b = t.volume.data - t.volume.data.mean()
    numerator = float(np.sum(a * b))
    denominator = math.sqrt(_sum_squares(a)) * math.sqrt(_sum_squares(b))
    return numerator / denominator


def dice(f: Volume, t: Template, f_threshold: float = 0.0) -> float:
    """
    Dice coefficient 2|A n B| / (|A| + |B|).

    A = voxels of f above f_threshold, B = template voxels above its
    mask_threshold. Two empty masks score 1.0.

    Raises:
        DimMismatch: If dims differ
    """
    check_dims(f, t)
    a = f.data > f_threshold
    b = t.volume.data > t.mask_threshold
    total = int(np.count_nonzero(a)) + int(np.count_nonzero(b))
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(a & b)) / total


def zscore(v: Volume) -> Volume:
    """
    Rescales to mean 0 and population standard deviation 1.

    Raises:
        ZeroVariance: If v is constant
    """
    _require_variance(v)
    data = v.data
    return v.with_data((data - data.mean()) / data.std())


def score(kind: MetricKind, f: Volume, t: Template, f_threshold: float = 0.0) -> float:
    """Evaluates the metric named by kind."""
    if kind is MetricKind.SSD:
        return ssd(f, t)
    if kind is MetricKind.NCC:
        return ncc(f, t)
    return dice(f, t, f_threshold)


# Voxel-level compositions over the partitioned engine


def _voxel_pairs(
    f: Volume, t: Template, config: Optional[ExecutionConfig], partition_count: Optional[int]
) -> PartitionedDataset:
    check_dims(f, t)
    config = config or ExecutionConfig()
    k = partition_count or config.workers
    left = PartitionedDataset.from_items([f], k, config).flat_map(lambda v: v.data.tolist())
    right = PartitionedDataset.from_items([t.volume], k, config).flat_map(
        lambda v: v.data.tolist()
    )
    return left.zip(right)


def _add3(a: Tuple[float, float, float], b: Tuple[float, float, float]) -> Tuple[float, float, float]:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def partitioned_ssd(
    f: Volume,
    t: Template,
    config: Optional[ExecutionConfig] = None,
    partition_count: Optional[int] = None,
) -> float:
    """SSD via flat_map voxels, zip, map squared difference, reduce sum."""
    pairs = _voxel_pairs(f, t, config, partition_count)
    return pairs.map(lambda p: (p[0] - p[1]) ** 2).reduce(operator.add, 0.0)


def partitioned_ncc(
    f: Volume,
    t: Template,
    config: Optional[ExecutionConfig] = None,
    partition_count: Optional[int] = None,
) -> float:
    """NCC via two reduce passes: means, then centred cross and auto products."""
    check_dims(f, t)
    _require_variance(f)
    _require_variance(t.volume)
    pairs = _voxel_pairs(f, t, config, partition_count)
    n = pairs.element_count
    sums = pairs.map(lambda p: (p[0], p[1], 0.0)).reduce(_add3, (0.0, 0.0, 0.0))
    mean_f, mean_t = sums[0] / n, sums[1] / n
    sxy, sxx, syy = pairs.map(
        lambda p: ((p[0] - mean_f) * (p[1] - mean_t), (p[0] - mean_f) ** 2, (p[1] - mean_t) ** 2)
    ).reduce(_add3, (0.0, 0.0, 0.0))
    return sxy / (math.sqrt(sxx) * math.sqrt(syy))


def partitioned_dice(
    f: Volume,
    t: Template,
    f_threshold: float = 0.0,
    config: Optional[ExecutionConfig] = None,
    partition_count: Optional[int] = None,
) -> float:
    """Dice via per-voxel (both, in A, in B) indicator triples summed by reduce."""
    threshold = t.mask_threshold
    pairs = _voxel_pairs(f, t, config, partition_count)
    both, in_a, in_b = pairs.map(
        lambda p: (
            int(p[0] > f_threshold and p[1] > threshold),
            int(p[0] > f_threshold),
            int(p[1] > threshold),
        )
    ).reduce(_add3, (0, 0, 0))
    if in_a + in_b == 0:
        return 1.0
    return 2.0 * both / (in_a + in_b)
