"""Input validation helpers shared by the estimators."""

import numpy as np

PSD_TOL = 1e-10


def check_vector(x, name, size=None, nonnegative=False):
    """Return ``x`` as a finite 1-D float array, raising ``ValueError`` otherwise."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if nonnegative and np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    return arr


def check_matrix(X, name, shape=None, square=False):
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_covariance(S, name="covariance", size=None, tol=PSD_TOL):
    """Symmetric positive semidefinite check; returns the symmetrized matrix."""
    arr = check_matrix(S, name, square=True)
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {size}")
    if not np.allclose(arr, arr.T, atol=1e-12, rtol=0.0):
        raise ValueError(f"{name} is not symmetric")
    arr = 0.5 * (arr + arr.T)
    if arr.size and np.linalg.eigvalsh(arr).min() < -tol:
        raise ValueError(f"{name} is not positive semidefinite")
    return arr


def psd_sqrt(S):
    """Symmetric square root of a PSD matrix (negative round-off eigenvalues clipped)."""
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def check_random_state(seed):
    """Mirror of sklearn's helper, but for ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
