"""2D projection of embedding sets for gap visualization.

Top-2 principal components via the iterated power method with deterministic
initialization and a canonical sign convention, so the CSV a run writes is
bit-stable. Two well-separated modality clusters show up as two lobes in the
projection; a successful bridging strategy collapses them.
"""

from __future__ import annotations

import numpy as np

__all__ = ["top_components", "project_2d"]

_MAX_ITER = 1000
_TOL = 1e-12


def _power_iterate(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Dominant eigenvector/value of a symmetric PSD matrix.

    Deterministic init: the basis vector of the largest diagonal entry (the
    coordinate with the most variance always overlaps the top component
    unless the matrix is zero).
    """
    d = cov.shape[0]
    v = np.zeros(d)
    v[int(np.argmax(np.diag(cov)))] = 1.0
    lam = 0.0
    for _ in range(_MAX_ITER):
        w = cov @ v
        norm = float(np.linalg.norm(w))
        if norm <= _TOL:
            return v, 0.0
        w /= norm
        if float(np.linalg.norm(w - v)) < _TOL:
            v, lam = w, norm
            break
        v, lam = w, norm
    # canonical sign: largest-magnitude coordinate is positive
    pivot = int(np.argmax(np.abs(v)))
    if v[pivot] < 0:
        v = -v
    return v, lam


def top_components(matrix: np.ndarray, n: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """(components (n, d), eigenvalues (n,)) of the sample covariance."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a (N >= 2, d) matrix to project")
    xc = x - x.mean(axis=0)
    cov = (xc.T @ xc) / (x.shape[0] - 1)
    comps = []
    lams = []
    for _ in range(n):
        v, lam = _power_iterate(cov)
        comps.append(v)
        lams.append(lam)
        cov = cov - lam * np.outer(v, v)    # deflate
    return np.stack(comps), np.array(lams)


def project_2d(matrix: np.ndarray) -> np.ndarray:
    """(N, 2) coordinates of the rows in the top-2 principal plane."""
    x = np.asarray(matrix, dtype=np.float64)
    comps, _ = top_components(x, n=2)
    return (x - x.mean(axis=0)) @ comps.T
