"""Synthetic datasets and sample-quality metrics.

Datasets are standardized to zero mean and unit per-axis variance right after
generation; the affine transform is recorded so samples can be mapped back to
raw coordinates. The 2D case studies lean on the standard scikit-learn
generators (moons, S-curve, swiss roll), with the 3D ones projected onto the
two informative axes.

Metrics: a one-dimensional Wasserstein-1 via sorted differences (with seeded
subsampling when sizes differ) and the energy distance

    ED(A, B) = 2 E||a - b|| - E||a - a'|| - E||b - b'||

estimated by U-statistics with a point cap, so the cost stays bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.datasets import make_moons, make_s_curve, make_swiss_roll

from .oracle import GaussianMixture

__all__ = [
    "Dataset",
    "make_dataset",
    "sample_mixture",
    "wasserstein1_1d",
    "energy_distance",
]

DATASET_KINDS = ("two_moons", "s_curve_2d", "swiss_roll_2d", "bimodal", "gmm")


@dataclass
class Dataset:
    samples: np.ndarray          # standardized, (n, d)
    kind: str
    params: dict
    seed: int
    shift: np.ndarray            # per-axis mean of the raw draw
    scale: np.ndarray            # per-axis std of the raw draw

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def to_raw(self, points):
        return np.asarray(points) * self.scale + self.shift

    def from_raw(self, raw):
        return (np.asarray(raw) - self.shift) / self.scale


def sample_mixture(mixture: GaussianMixture, n: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Exact draws from a Gaussian mixture, shape (n, d)."""
    comp = rng.choice(mixture.n_components, size=n, p=mixture.weights)
    normals = rng.standard_normal((n, mixture.dim))
    out = np.empty((n, mixture.dim))
    for j in range(mixture.n_components):
        mask = comp == j
        if not np.any(mask):
            continue
        chol = np.linalg.cholesky(mixture.covs[j])
        out[mask] = mixture.means[j] + normals[mask] @ chol.T
    return out


def _raw_draw(kind, n, seed, params):
    if kind == "two_moons":
        noise = float(params.get("noise", 0.05))
        pts, _ = make_moons(n_samples=n, noise=noise, random_state=seed)
        return pts
    if kind == "s_curve_2d":
        noise = float(params.get("noise", 0.05))
        pts, _ = make_s_curve(n_samples=n, noise=noise, random_state=seed)
        return pts[:, [0, 2]]        # the curve lives in the x-z plane
    if kind == "swiss_roll_2d":
        noise = float(params.get("noise", 0.05))
        pts, _ = make_swiss_roll(n_samples=n, noise=noise, random_state=seed)
        return pts[:, [0, 2]]        # the roll lives in the x-z plane
    if kind == "bimodal":
        m = float(params.get("m", 2.0))
        sigma = float(params.get("sigma", 0.3))
        rng = np.random.default_rng(seed)
        signs = rng.integers(0, 2, size=n) * 2 - 1
        return (signs * m + sigma * rng.standard_normal(n))[:, None]
    if kind == "gmm":
        mixture = params.get("mixture")
        if not isinstance(mixture, GaussianMixture):
            raise ValueError("gmm dataset needs a mixture= parameter")
        return sample_mixture(mixture, n, np.random.default_rng(seed))
    raise ValueError(f"unknown dataset kind {kind!r}; "
                     f"choose from {', '.join(DATASET_KINDS)}")


def make_dataset(kind: str, n: int, seed: int = 0, **params) -> Dataset:
    """Generate and standardize a named dataset.

    Args:
        kind: One of two_moons, s_curve_2d, swiss_roll_2d, bimodal, gmm.
        n: Number of points.
        seed: Generator seed (deterministic output).
        **params: Kind-specific knobs (noise for the 2D sets, m/sigma for
            bimodal, mixture for gmm).
    """
    if n < 2:
        raise ValueError("need at least two points to standardize")
    raw = np.asarray(_raw_draw(kind, n, seed, params), dtype=np.float64)
    shift = raw.mean(axis=0)
    scale = raw.std(axis=0)
    if np.any(scale <= 0.0):
        raise ValueError("degenerate dataset: zero variance on some axis")
    return Dataset(samples=(raw - shift) / scale, kind=kind,
                   params=dict(params), seed=seed, shift=shift, scale=scale)


def wasserstein1_1d(a, b, seed: int = 0) -> float:
    """W1 between two 1D samples by sorted differences.

    When sizes differ, the longer sample is subsampled without replacement
    (seeded) to the shorter length, keeping the estimator unbiased enough for
    gate checks while staying O(n log n).
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    rng = np.random.default_rng(seed)
    if a.size > b.size:
        a = rng.choice(a, size=b.size, replace=False)
    elif b.size > a.size:
        b = rng.choice(b, size=a.size, replace=False)
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def energy_distance(a, b, max_points: int = 4096, seed: int = 0) -> float:
    """Energy distance between two point clouds (U-statistic estimate).

    Each cloud is subsampled to at most max_points (seeded, without
    replacement); within-cloud means exclude the diagonal.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("expected (n, d) point clouds")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("energy distance needs at least two points per side")
    rng = np.random.default_rng(seed)
    if a.shape[0] > max_points:
        a = a[rng.choice(a.shape[0], size=max_points, replace=False)]
    if b.shape[0] > max_points:
        b = b[rng.choice(b.shape[0], size=max_points, replace=False)]
    n, m = a.shape[0], b.shape[0]
    cross = float(cdist(a, b).mean())
    within_a = float(cdist(a, a).sum()) / (n * (n - 1))
    within_b = float(cdist(b, b).sum()) / (m * (m - 1))
    return 2.0 * cross - within_a - within_b
