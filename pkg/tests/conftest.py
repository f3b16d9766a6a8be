import numpy as np
import pytest

from dropcae.data import HsiMatrix


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at flat array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.max(np.abs(a - b) / scale)


def blob_matrix(seed=0, n_per=400, centers=((0.2, 0.2), (0.8, 0.8)), spread=0.05,
                d_extra=0):
    """Well-separated Gaussian blobs packed into an HsiMatrix, one class each."""
    rng = np.random.default_rng(seed)
    rows = []
    labels = []
    for ci, center in enumerate(centers, start=1):
        pts = rng.normal(loc=center, scale=spread, size=(n_per, len(center)))
        rows.append(pts)
        labels.extend([ci] * n_per)
    values = np.clip(np.vstack(rows), 0.0, 1.0)
    if d_extra:
        noise = rng.random((values.shape[0], d_extra))
        values = np.hstack([values, noise])
    order = rng.permutation(values.shape[0])
    return HsiMatrix(values[order], np.asarray(labels)[order],
                     np.arange(values.shape[1]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
