"""Small numeric helpers: vector validation, seeded RNGs, and the
central-difference gradient oracle used to check analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericalError

FD_STEP = 1e-5


def as_vec(x, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name}: expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name}: non-finite entries")
    return v


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite 2-D float64 array (a single vector becomes one row)."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name}: non-finite entries")
    return A


def make_rng(seed: int) -> np.random.Generator:
    # PCG64 streams are specified bit-for-bit, so they are platform stable.
    return np.random.Generator(np.random.PCG64(int(seed) % 2**64))


def worker_seed(seed: int, worker: int) -> int:
    return (int(seed) + int(worker)) % 2**64


def finite_diff_grad(fn: Callable[[np.ndarray], float], x, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function.

    Raises NumericalError naming the coordinate if ``fn`` is non-finite at
    either probe point.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(fn(x))
        flat[i] = orig - h
        fm = float(fn(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"non-finite function value probing coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(x.shape)


def rel_err(a, b) -> float:
    """||a - b|| / max(1, ||a||) -- the gradient-check metric."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(1.0, np.linalg.norm(a)))
