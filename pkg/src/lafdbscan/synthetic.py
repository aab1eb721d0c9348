"""Seeded synthetic datasets on the unit sphere."""

from __future__ import annotations

import numpy as np

from .vecspace import Dataset

__all__ = ["sphere_mixture", "unit_circle"]


def sphere_mixture(n: int, dim: int, components: int = 2, spread: float = 0.3,
                   background: float = 0.0, seed: int = 0,
                   weights=None) -> tuple[Dataset, np.ndarray]:
    """Gaussian blobs around random unit directions, projected onto the sphere.

    ``spread`` is the per-point perturbation norm (in expectation) before
    re-normalization; ``background`` is the fraction of points drawn
    uniformly on the sphere. Returns the dataset and each point's
    component (``-1`` for background).
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(components, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    n_bg = int(round(background * n))
    n_fg = n - n_bg
    if weights is None:
        weights = np.full(components, 1.0 / components)
    comp = rng.choice(components, size=n_fg, p=np.asarray(weights) / np.sum(weights))
    pts = centers[comp] + rng.normal(scale=spread / np.sqrt(dim), size=(n_fg, dim))
    bg = rng.normal(size=(n_bg, dim))
    X = np.vstack([pts, bg])
    truth = np.concatenate([comp, np.full(n_bg, -1)])
    order = rng.permutation(n)
    return Dataset(X[order], normalize=True), truth[order]


def unit_circle(degrees) -> Dataset:
    """Points on the unit circle at the given angles (degrees)."""
    a = np.deg2rad(np.asarray(degrees, dtype=np.float64))
    return Dataset(np.column_stack([np.cos(a), np.sin(a)]), normalize=True)
