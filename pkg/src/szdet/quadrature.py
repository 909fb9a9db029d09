"""Gauss rules on reference simplices (collapsed-coordinate Gauss-Jacobi)."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


def _jacobi01(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights on [0, 1] for the weight (1 - a)^alpha
    x, w = roots_jacobi(n, alpha, 0)
    return 0.5 * (x + 1.0), w


@lru_cache(maxsize=None)
def simplex_rule(k: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the reference k-simplex exact for total degree ``2n - 1``.

    Returns barycentric coordinates of shape (q, k+1) and weights that sum
    to one, so an integral is ``measure * sum(w * f(points))``.
    """
    if k == 0:
        return np.ones((1, 1)), np.ones(1)
    if k == 1:
        a, wa = _jacobi01(n, 0)
        pts = a[:, None]
        w = wa
    elif k == 2:
        a, wa = _jacobi01(n, 1)
        b, wb = _jacobi01(n, 0)
        A, B = np.meshgrid(a, b, indexing="ij")
        pts = np.stack([A.ravel(), (B * (1 - A)).ravel()], axis=1)
        w = np.outer(wa, wb).ravel()
    elif k == 3:
        a, wa = _jacobi01(n, 2)
        b, wb = _jacobi01(n, 1)
        c, wc = _jacobi01(n, 0)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        pts = np.stack(
            [A.ravel(), (B * (1 - A)).ravel(), (C * (1 - A) * (1 - B)).ravel()], axis=1
        )
        w = np.einsum("i,j,k->ijk", wa, wb, wc).ravel()
    else:
        raise ValueError(f"unsupported simplex dimension {k}")
    bary = np.concatenate([1.0 - pts.sum(axis=1, keepdims=True), pts], axis=1)
    w = w / w.sum()
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def points_for_degree(degree: int) -> int:
    """Smallest 1D point count whose collapsed rule is exact for ``degree``."""
    return max(1, (degree + 2) // 2)
