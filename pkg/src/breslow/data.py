"""Domain model: samples, Breslow staging, binary depth classes, dataset merging
and the tab-separated feature-file wire format."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Binary grouping threshold: lesions shallower than this are the low-depth class.
DEPTH_THRESHOLD_MM = 0.76

# Stage boundaries in mm; intervals are half-open [lo, hi) so 0.76 is Stage II.
STAGE_BOUNDARIES_MM = (0.76, 1.5, 4.0)


class BreslowStage(enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


class DepthClass(enum.Enum):
    LOW = "Low"
    HIGH = "High"


class FeatureFileError(ValueError):
    """Malformed feature file; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def check_thickness(value: float) -> float:
    """Validate a biopsy thickness in millimeters (finite and non-negative)."""
    value = float(value)
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"thickness must be finite, got {value!r}")
    if value < 0:
        raise ValueError(f"thickness must be non-negative, got {value!r}")
    return value


def stage_of(thickness_mm: float) -> BreslowStage:
    """Breslow stage for a thickness, using half-open [lo, hi) depth ranges."""
    t = check_thickness(thickness_mm)
    if t < STAGE_BOUNDARIES_MM[0]:
        return BreslowStage.I
    if t < STAGE_BOUNDARIES_MM[1]:
        return BreslowStage.II
    if t < STAGE_BOUNDARIES_MM[2]:
        return BreslowStage.III
    return BreslowStage.IV


def depth_class_of(thickness_mm: float) -> DepthClass:
    """Binary depth class: LOW below 0.76 mm, HIGH at or above it."""
    t = check_thickness(thickness_mm)
    return DepthClass.LOW if t < DEPTH_THRESHOLD_MM else DepthClass.HIGH


@dataclass(frozen=True, eq=False)
class Sample:
    """One lesion: feature vector, source tag, optional biopsy thickness, class label.

    Feature vectors are float64, finite, and frozen after construction.
    When a thickness is present the label must agree with ``depth_class_of``.
    """

    id: str
    source: str
    features: np.ndarray
    thickness: float | None
    label: DepthClass

    def __post_init__(self):
        if not self.id:
            raise ValueError("sample id must not be empty")
        if not self.source:
            raise ValueError("sample source must not be empty")
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1 or feats.size == 0:
            raise ValueError(f"features must be a non-empty 1-D vector, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError(f"sample {self.id!r}: features contain non-finite entries")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)
        if self.thickness is not None:
            t = check_thickness(self.thickness)
            object.__setattr__(self, "thickness", t)
            if depth_class_of(t) is not self.label:
                raise ValueError(
                    f"sample {self.id!r}: label {self.label.value} inconsistent with "
                    f"thickness {t} mm"
                )

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.id == other.id
            and self.source == other.source
            and self.thickness == other.thickness
            and self.label is other.label
            and self.features.shape == other.features.shape
            and bool(np.all(self.features == other.features))
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered, immutable collection of samples sharing one feature dimension."""

    samples: tuple[Sample, ...]
    dim: int = field(init=False)
    source_counts: dict = field(init=False)

    def __post_init__(self):
        samples = tuple(self.samples)
        if not samples:
            raise ValueError("dataset must contain at least one sample")
        object.__setattr__(self, "samples", samples)
        dim = samples[0].dim
        seen: set[str] = set()
        counts: dict[str, dict[str, int]] = {}
        for s in samples:
            if s.dim != dim:
                raise ValueError(
                    f"sample {s.id!r} has dimension {s.dim}, expected {dim}"
                )
            if s.id in seen:
                raise ValueError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)
            per = counts.setdefault(s.source, {"Low": 0, "High": 0})
            per[s.label.value] += 1
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "source_counts", counts)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return len(self) == len(other) and all(
            a == b for a, b in zip(self.samples, other.samples)
        )

    def class_counts(self) -> tuple[int, int]:
        """(n_low, n_high) over the whole collection."""
        n_high = sum(1 for s in self.samples if s.label is DepthClass.HIGH)
        return len(self.samples) - n_high, n_high

    def imbalance_ratio(self) -> float:
        """count(Low) / count(High); inf when no High samples exist."""
        n_low, n_high = self.class_counts()
        return n_low / n_high if n_high else math.inf

    def feature_matrix(self) -> np.ndarray:
        """N x D float64 matrix of all feature vectors, in sample order."""
        return np.stack([s.features for s in self.samples])

    def label_array(self) -> np.ndarray:
        """Integer labels in sample order (LOW=0, HIGH=1)."""
        return np.array(
            [1 if s.label is DepthClass.HIGH else 0 for s in self.samples], dtype=np.int64
        )

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.samples[i] for i in indices))


def merge_datasets(parts: Sequence[Dataset]) -> Dataset:
    """Concatenate datasets; dimensions must match and sample ids stay unique."""
    if not parts:
        raise ValueError("nothing to merge")
    dim = parts[0].dim
    for p in parts[1:]:
        if p.dim != dim:
            raise ValueError(f"dimension mismatch: {p.dim} != {dim}")
    merged: list[Sample] = []
    for p in parts:
        merged.extend(p.samples)
    # Dataset construction re-checks id uniqueness and aggregates source counts.
    return Dataset(tuple(merged))


def _format_float(x: float) -> str:
    # repr() is the shortest string that round-trips the float64 exactly.
    return repr(float(x))


def parse_feature_file(path) -> Dataset:
    """Read the tab-separated feature wire format.

    Layout: header line ``#dim=<D>``, then per sample
    ``id<TAB>source<TAB>thickness_or_empty<TAB>label<TAB>f1..fD`` (LF endings).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FeatureFileError("empty file, expected '#dim=<D>' header", line=1)
    header = lines[0]
    if not header.startswith("#dim="):
        raise FeatureFileError(f"malformed header {header!r}, expected '#dim=<D>'", line=1)
    try:
        dim = int(header[len("#dim="):])
    except ValueError:
        raise FeatureFileError(f"malformed header {header!r}: dimension not an integer", line=1)
    if dim < 1:
        raise FeatureFileError(f"dimension must be positive, got {dim}", line=1)

    samples: list[Sample] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw:
            continue
        fields = raw.split("\t")
        if len(fields) != 4 + dim:
            raise FeatureFileError(
                f"expected {4 + dim} tab-separated fields, got {len(fields)}", line=lineno
            )
        sid, source, thick_raw, label_raw = fields[:4]
        if label_raw not in ("Low", "High"):
            raise FeatureFileError(f"unknown label {label_raw!r}", line=lineno)
        label = DepthClass(label_raw)
        thickness: float | None = None
        if thick_raw != "":
            try:
                thickness = check_thickness(float(thick_raw))
            except ValueError as exc:
                raise FeatureFileError(str(exc), line=lineno)
        try:
            feats = np.array([float(v) for v in fields[4:]], dtype=np.float64)
        except ValueError as exc:
            raise FeatureFileError(f"bad feature value: {exc}", line=lineno)
        if not np.all(np.isfinite(feats)):
            raise FeatureFileError("non-finite feature value", line=lineno)
        try:
            samples.append(Sample(sid, source, feats, thickness, label))
        except ValueError as exc:
            raise FeatureFileError(str(exc), line=lineno)
    if not samples:
        raise FeatureFileError("file contains a header but no samples")
    try:
        return Dataset(tuple(samples))
    except ValueError as exc:
        raise FeatureFileError(str(exc))


def write_feature_file(ds: Dataset, path) -> None:
    """Write the wire format so that ``parse_feature_file`` round-trips exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"#dim={ds.dim}\n")
        for s in ds.samples:
            thick = _format_float(s.thickness) if s.thickness is not None else ""
            feats = "\t".join(_format_float(v) for v in s.features)
            fh.write(f"{s.id}\t{s.source}\t{thick}\t{s.label.value}\t{feats}\n")
