"""Correlation analytics between predicted deep-class probability and true
biopsy thickness: polynomial least-squares fits, overall and per-segment R2,
and 0.1 mm bin statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SEGMENT_BOUNDARIES = (0.4, 1.0)
DEFAULT_BIN_WIDTH_MM = 0.1

# Relative slack when assigning a value to a half-open bin, so that decimal
# thicknesses that are not exactly representable land on the intended side.
_BIN_SNAP = 1e-9


@dataclass(frozen=True)
class ThicknessPrediction:
    thickness: float
    p_high: float

    def __post_init__(self):
        if not np.isfinite(self.thickness) or self.thickness < 0:
            raise ValueError(f"invalid thickness {self.thickness}")
        if not np.isfinite(self.p_high) or not 0 <= self.p_high <= 1:
            raise ValueError(f"p_high must lie in [0, 1], got {self.p_high}")


@dataclass(frozen=True)
class RegressionFit:
    degree: int
    coefficients: tuple[float, ...]  # ascending powers of thickness
    r2_overall: float
    r2_segments: tuple[float | None, ...]
    segment_boundaries: tuple[float, float]

    def predict(self, t: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=np.float64),
                                                np.asarray(self.coefficients))


@dataclass(frozen=True)
class BinRow:
    center: float
    count: int
    mean: float
    std: float
    single_point: bool
    dispersion: str  # tercile tag of the bin std: low / mid / high


@dataclass(frozen=True)
class BinStats:
    width: float
    bins: tuple[BinRow, ...]


def _arrays(points) -> tuple[np.ndarray, np.ndarray]:
    t = np.array([p.thickness for p in points], dtype=np.float64)
    y = np.array([p.p_high for p in points], dtype=np.float64)
    return t, y


def polyfit(points, degree: int, boundaries=DEFAULT_SEGMENT_BOUNDARIES) -> RegressionFit:
    """Ordinary least squares of p_high on powers of thickness.

    Fitting runs in a shifted/scaled variable (an orthogonalizing solver, not
    normal equations); coefficients are converted back to raw powers.
    """
    if degree not in (1, 2, 3):
        raise ValueError(f"degree must be 1, 2, or 3, got {degree}")
    t, y = _arrays(points)
    if np.unique(t).size < degree + 1:
        raise ValueError(
            f"need at least {degree + 1} distinct thickness values, got {np.unique(t).size}"
        )
    series = np.polynomial.Polynomial.fit(t, y, deg=degree)
    coeffs = tuple(float(c) for c in series.convert().coef)
    # Degenerate leading terms can be dropped by convert(); pad with zeros.
    coeffs = coeffs + (0.0,) * (degree + 1 - len(coeffs))
    fit = RegressionFit(
        degree=degree, coefficients=coeffs, r2_overall=0.0,
        r2_segments=(None, None, None), segment_boundaries=tuple(boundaries),
    )
    r2 = r_squared(points, fit)
    segs = segment_r2(points, fit, boundaries)
    return RegressionFit(
        degree=degree, coefficients=coeffs, r2_overall=r2,
        r2_segments=segs, segment_boundaries=tuple(boundaries),
    )


def r_squared(points, fit: RegressionFit) -> float:
    """1 - SSres/SStot of the given fit over the given points; may be negative
    when the fit is evaluated away from its training region."""
    t, y = _arrays(points)
    if t.size < 2:
        raise ValueError("need at least 2 points")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("zero response variance")
    ss_res = float(np.sum((y - fit.predict(t)) ** 2))
    return 1.0 - ss_res / ss_tot


def segment_r2(points, fit: RegressionFit, boundaries=DEFAULT_SEGMENT_BOUNDARIES):
    """R2 of the global fit restricted to [0, b0), [b0, b1), [b1, inf).

    Segments with fewer than two points or no response variance are reported
    as None rather than fabricated.
    """
    b0, b1 = boundaries
    if not 0 < b0 < b1:
        raise ValueError(f"boundaries must satisfy 0 < b0 < b1, got {boundaries}")
    t, _ = _arrays(points)
    masks = (t < b0), (t >= b0) & (t < b1), (t >= b1)
    out: list[float | None] = []
    for mask in masks:
        seg = [p for p, m in zip(points, mask) if m]
        try:
            out.append(r_squared(seg, fit))
        except ValueError:
            out.append(None)
    return tuple(out)


def bin_index(t: float, width: float) -> int:
    """Index of the half-open bin [i*width, (i+1)*width) containing t."""
    return int(np.floor(t / width + _BIN_SNAP))


def bin_stats(points, width: float = DEFAULT_BIN_WIDTH_MM) -> BinStats:
    """Mean and unbiased std of p_high per 0.1 mm thickness bin; empty bins
    are omitted and each bin carries a dispersion tercile tag."""
    if width <= 0:
        raise ValueError(f"bin width must be positive, got {width}")
    if not points:
        raise ValueError("no points to bin")
    groups: dict[int, list[float]] = {}
    for p in points:
        groups.setdefault(bin_index(p.thickness, width), []).append(p.p_high)

    rows = []
    for idx in sorted(groups):
        vals = np.array(groups[idx])
        single = vals.size == 1
        std = 0.0 if single else float(np.std(vals, ddof=1))
        rows.append((idx, vals.size, float(vals.mean()), std, single))

    stds = np.array([r[3] for r in rows])
    q1, q2 = np.quantile(stds, [1 / 3, 2 / 3])
    out = tuple(
        BinRow(
            center=(idx + 0.5) * width,
            count=count,
            mean=mean,
            std=std,
            single_point=single,
            dispersion="low" if std <= q1 else ("mid" if std <= q2 else "high"),
        )
        for idx, count, mean, std, single in rows
    )
    return BinStats(width=width, bins=out)
