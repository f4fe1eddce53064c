"""Deep-feature subspace analytics: PCA with interclass-separation axis
selection, single-response PLS, 2-D distribution ellipses, and 1-D Gaussian
fits per thickness band."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# Thickness bands used for ellipse/Gaussian grouping (mm).
BAND_BOUNDARIES = (0.4, 1.0)
DEFAULT_COVERAGE_STD = 2.0


def thickness_band(t: float) -> str:
    if t < BAND_BOUNDARIES[0]:
        return "low"
    if t < BAND_BOUNDARIES[1]:
        return "mid"
    return "high"


@dataclass(frozen=True)
class PcaBasis:
    mean: np.ndarray        # D
    axes: np.ndarray        # D x D, rows orthonormal, variance-ordered
    variances: np.ndarray   # descending eigenvalues
    fisher_scores: np.ndarray | None = None


@dataclass(frozen=True)
class PlsBasis:
    weights: np.ndarray     # n_components x D, unit rows
    scores: np.ndarray      # N x n_components
    x_mean: np.ndarray
    y_mean: float


@dataclass(frozen=True)
class GroupEllipse:
    group: str
    center: np.ndarray         # 2
    axis_lengths: np.ndarray   # semi-axes at the coverage factor, descending
    orientation: float         # radians in [0, pi)
    degenerate: bool


@dataclass(frozen=True)
class Gaussian1D:
    group: str
    mu: float
    sigma: float
    degenerate: bool


def pca_fit(features: np.ndarray) -> PcaBasis:
    """Mean-centered PCA via SVD; the largest-magnitude component of each axis
    is made positive so the basis is deterministic."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"need an (N>=2) x D matrix, got shape {X.shape}")
    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=True)
    variances = np.zeros(X.shape[1])
    variances[: s.size] = s ** 2 / (X.shape[0] - 1)
    axes = vt
    flip = np.sign(axes[np.arange(axes.shape[0]), np.argmax(np.abs(axes), axis=1)])
    axes = axes * flip[:, None]
    return PcaBasis(mean=mean, axes=axes, variances=variances)


def fisher_axis_scores(
    basis: PcaBasis, features: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, tuple[int, int]]:
    """Fisher criterion per basis axis (between-class over pooled within-class
    variance of the projections) and the indices of the top two axes."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size != 2:
        raise ValueError(f"need exactly two classes, got {classes.size}")
    proj = (X - basis.mean) @ basis.axes.T  # N x D
    m_all = proj.mean(axis=0)
    between = np.zeros(proj.shape[1])
    within = np.zeros(proj.shape[1])
    for cls in classes:
        p = proj[y == cls]
        m_c = p.mean(axis=0)
        between += p.shape[0] * (m_c - m_all) ** 2
        within += np.sum((p - m_c) ** 2, axis=0)
    within = within / max(proj.shape[0] - 2, 1)
    scores = np.where(between == 0.0, 0.0, between / np.maximum(within, 1e-300))
    # Descending score, ties broken by axis index for determinism.
    order = np.lexsort((np.arange(scores.size), -scores))
    return scores, (int(order[0]), int(order[1]))


def attach_fisher_scores(basis: PcaBasis, scores: np.ndarray) -> PcaBasis:
    return replace(basis, fisher_scores=scores)


def pls_fit(features: np.ndarray, labels: np.ndarray, n_components: int = 2) -> PlsBasis:
    """Single-response PLS, NIPALS-style: each weight vector maximizes
    covariance with the response; only the feature block is deflated."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.shape[0] <= n_components:
        raise ValueError("need more samples than components")
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xd = X - x_mean
    yc = y - y_mean
    weights, scores = [], []
    for _ in range(n_components):
        w = Xd.T @ yc
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            raise ValueError("response has no covariance with the features")
        w = w / norm
        t = Xd @ w
        tt = float(t @ t)
        if tt == 0.0:
            raise ValueError("degenerate component with zero score variance")
        p = Xd.T @ t / tt
        Xd = Xd - np.outer(t, p)
        weights.append(w)
        scores.append(t)
    return PlsBasis(
        weights=np.stack(weights), scores=np.stack(scores, axis=1),
        x_mean=x_mean, y_mean=y_mean,
    )


def project(basis: PcaBasis, features: np.ndarray, axis_indices) -> np.ndarray:
    """Centered features dotted with the selected basis axes."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    idx = list(axis_indices)
    if any(i < 0 or i >= basis.axes.shape[0] for i in idx):
        raise IndexError(f"axis indices {idx} out of range for {basis.axes.shape[0]} axes")
    return (X - basis.mean) @ basis.axes[idx].T


def fit_ellipse(points2d: np.ndarray, group: str = "", coverage: float = DEFAULT_COVERAGE_STD) -> GroupEllipse:
    """Covariance ellipse of a 2-D point group: center at the mean, semi-axes
    coverage * sqrt(eigenvalues). A rank-deficient covariance is flagged and
    reported as a line segment (zero minor axis)."""
    pts = np.asarray(points2d, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"need an N x 2 matrix, got shape {pts.shape}")
    if pts.shape[0] < 3:
        raise ValueError(f"need at least 3 points, got {pts.shape[0]}")
    center = pts.mean(axis=0)
    cov = np.cov(pts, rowvar=False, ddof=1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    evals = np.maximum(evals, 0.0)
    degenerate = bool(evals[1] <= 1e-12 * max(evals[0], 1.0))
    major = evecs[:, 0]
    theta = float(np.arctan2(major[1], major[0]))
    if theta < 0:
        theta += np.pi
    if theta >= np.pi:
        theta -= np.pi
    return GroupEllipse(
        group=group, center=center,
        axis_lengths=coverage * np.sqrt(evals),
        orientation=theta, degenerate=degenerate,
    )


def fit_gaussian_1d(values: np.ndarray, group: str = "") -> Gaussian1D:
    """Sample mean and unbiased standard deviation of a 1-D group."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"need at least 2 one-dimensional values, got shape {v.shape}")
    sigma = float(np.std(v, ddof=1))
    return Gaussian1D(group=group, mu=float(v.mean()), sigma=sigma, degenerate=sigma == 0.0)


def ellipse_contains(ellipse: GroupEllipse, points2d: np.ndarray) -> np.ndarray:
    """Boolean mask of points inside the ellipse boundary."""
    pts = np.atleast_2d(np.asarray(points2d, dtype=np.float64)) - ellipse.center
    c, s = np.cos(ellipse.orientation), np.sin(ellipse.orientation)
    rot = np.array([[c, s], [-s, c]])
    local = pts @ rot.T
    a, b = ellipse.axis_lengths
    if a <= 0:
        return np.zeros(pts.shape[0], dtype=bool)
    if b <= 0:
        return np.zeros(pts.shape[0], dtype=bool)
    return (local[:, 0] / a) ** 2 + (local[:, 1] / b) ** 2 <= 1.0


def ellipse_overlap_area(
    e1: GroupEllipse, e2: GroupEllipse, n_samples: int = 20000, seed: int = 0
) -> float:
    """Monte Carlo estimate of the overlap area: uniform samples inside e1,
    scaled by e1's area."""
    if e1.degenerate or e2.degenerate:
        return 0.0
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.random(n_samples))
    phi = 2 * np.pi * rng.random(n_samples)
    unit = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
    a, b = e1.axis_lengths
    c, s = np.cos(e1.orientation), np.sin(e1.orientation)
    rot = np.array([[c, -s], [s, c]])
    pts = (unit * np.array([a, b])) @ rot.T + e1.center
    frac = float(np.mean(ellipse_contains(e2, pts)))
    return frac * np.pi * a * b
