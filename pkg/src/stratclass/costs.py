"""Manipulation costs c(x, z) and their z-gradients.

Both functions accept single vectors or row-aligned batches (n, d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
SQUARED = "squared-euclidean"
COSTS = (EUCLIDEAN, SQUARED)


@dataclass(frozen=True)
class CostFn:
    kind: str = EUCLIDEAN
    # Only the Euclidean gradient is smoothed; cost() is always exact.
    delta: float = 1e-8

    def __post_init__(self):
        if self.kind not in COSTS:
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if not self.delta > 0:
            raise ValueError("smoothing delta must be positive")

    def __call__(self, x, z):
        return cost(self, x, z)

    def grad_z(self, x, z):
        return cost_grad_z(self, x, z)


def _diff(x, z) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape[-1] != z.shape[-1]:
        raise ValueError(f"dimension mismatch: x has {x.shape[-1]}, z has {z.shape[-1]}")
    return z - x


def cost(cfn: CostFn, x, z):
    d = _diff(x, z)
    sq = np.sum(d * d, axis=-1)
    if cfn.kind == SQUARED:
        return sq if np.ndim(sq) else float(sq)
    out = np.sqrt(sq)
    return out if np.ndim(out) else float(out)


def cost_grad_z(cfn: CostFn, x, z) -> np.ndarray:
    d = _diff(x, z)
    if cfn.kind == SQUARED:
        return 2.0 * d
    norm = np.sqrt(np.sum(d * d, axis=-1, keepdims=True) + cfn.delta**2)
    return d / norm


def cost_prox(cfn: CostFn, x, v, t):
    """argmin_z  t * c(x, z) + ||z - v||^2 / 2, row-wise with step(s) ``t``.

    Euclidean: shrink v toward x by t (soft threshold on the displacement).
    Squared: (v + 2 t x) / (1 + 2 t).
    """
    d = _diff(x, v)
    t = np.asarray(t, dtype=np.float64)
    if d.ndim == 2 and t.ndim == 1:
        t = t[:, None]
    x = np.asarray(x, dtype=np.float64)
    if cfn.kind == SQUARED:
        return x + d / (1.0 + 2.0 * t)
    r = np.sqrt(np.sum(d * d, axis=-1, keepdims=True))
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(r > t, 1.0 - t / r, 0.0)
    return x + shrink * d
