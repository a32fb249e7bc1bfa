"""Minority oversampling (SMOTE / ADASYN) for the training split.

Both samplers interpolate between a minority sample and one of its k
nearest minority neighbors: s = x + u * (nn - x), u ~ Uniform(0,1).
Neighbor geometry runs on standardized features; synthetics are mapped
back to raw units before fitting.  ADASYN allocates synthetics per
minority point in proportion to how majority-dominated its full-set
neighborhood is; SMOTE spreads them round-robin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

_METHODS = ("none", "smote", "adasyn")


class ResampleError(Exception):
    pass


@dataclass(frozen=True)
class ResamplePlan:
    method: str = "none"
    k: int = 5
    target_ratio: float = 1.0  # minority/majority after sampling
    beta: float = 1.0  # ADASYN balance level
    seed: int = 0

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0.0 < self.target_ratio <= 1.0):
            raise ValueError("target_ratio must be in (0, 1]")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must be in [0, 1]")


@dataclass
class Scaler:
    mean: np.ndarray
    sd: np.ndarray  # population sd; 0 marks a constant column

    def transform(self, x: np.ndarray) -> np.ndarray:
        safe = np.where(self.sd == 0.0, 1.0, self.sd)
        z = (np.asarray(x, dtype=np.float64) - self.mean) / safe
        z[:, self.sd == 0.0] = 0.0
        return z

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.sd + self.mean


def standardize(x: np.ndarray) -> tuple[np.ndarray, Scaler]:
    """Column z-scores from the given rows; constant columns become 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise ResampleError("standardize needs at least 2 rows")
    scaler = Scaler(mean=x.mean(axis=0), sd=x.std(axis=0))
    return scaler.transform(x), scaler


def _interpolate(x: np.ndarray, neighbor: np.ndarray, u: float) -> np.ndarray:
    return x + u * (neighbor - x)


def _minority_neighbors(z_minority: np.ndarray, k: int) -> np.ndarray:
    m = z_minority.shape[0]
    if m <= k:
        raise ResampleError(
            f"minority size {m} must exceed k={k}; rerun with a smaller k"
        )
    _, idx = cKDTree(z_minority).query(z_minority, k=k + 1)
    neighbors = np.empty((m, k), dtype=np.int64)
    for i in range(m):
        row = [j for j in idx[i] if j != i]
        neighbors[i] = row[:k]
    return neighbors


def _generate(z_minority, neighbors, counts, rng) -> np.ndarray:
    out = []
    k = neighbors.shape[1]
    for i in range(z_minority.shape[0]):
        for _ in range(int(counts[i])):
            nn = z_minority[neighbors[i][rng.integers(k)]]
            out.append(_interpolate(z_minority[i], nn, rng.random()))
    if not out:
        return np.empty((0, z_minority.shape[1]))
    return np.vstack(out)


def smote(z_minority: np.ndarray, k: int, n_synthetic: int, seed: int) -> np.ndarray:
    """Round-robin SMOTE: every minority point seeds floor(n/m) synthetics,
    the remainder goes to a seeded random subset without replacement."""
    z_minority = np.asarray(z_minority, dtype=np.float64)
    neighbors = _minority_neighbors(z_minority, k)
    if n_synthetic <= 0:
        return np.empty((0, z_minority.shape[1]))
    m = z_minority.shape[0]
    rng = np.random.default_rng(seed)
    base, rem = divmod(n_synthetic, m)
    counts = np.full(m, base, dtype=np.int64)
    if rem:
        counts[rng.permutation(m)[:rem]] += 1
    return _generate(z_minority, neighbors, counts, rng)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def adasyn_allocation(
    z_minority: np.ndarray, z_majority: np.ndarray, k: int, beta: float
) -> np.ndarray:
    """Per-seed synthetic counts: G = (|maj|-|min|)*beta distributed as
    g_i = round(r_hat_i * G), where r_hat_i is the normalized share of
    majority points among x_i's k nearest neighbors in the full split."""
    z_minority = np.asarray(z_minority, dtype=np.float64)
    z_majority = np.asarray(z_majority, dtype=np.float64)
    if z_majority.shape[0] == 0:
        raise ResampleError("adasyn needs a non-empty majority class")
    m = z_minority.shape[0]
    g_total = (z_majority.shape[0] - m) * beta
    if g_total <= 0:
        return np.zeros(m, dtype=np.int64)

    full = np.vstack([z_minority, z_majority])  # minority indices 0..m-1
    _, idx = cKDTree(full).query(z_minority, k=k + 1)
    delta = np.empty(m, dtype=np.float64)
    for i in range(m):
        near = [j for j in idx[i] if j != i][:k]
        delta[i] = sum(1 for j in near if j >= m)
    r = delta / k
    total = r.sum()
    r_hat = np.full(m, 1.0 / m) if total == 0.0 else r / total
    return np.array([_round_half_up(rh * g_total) for rh in r_hat], dtype=np.int64)


def adasyn(
    z_minority: np.ndarray,
    z_majority: np.ndarray,
    k: int,
    beta: float,
    seed: int,
) -> np.ndarray:
    z_minority = np.asarray(z_minority, dtype=np.float64)
    counts = adasyn_allocation(z_minority, z_majority, k, beta)
    if counts.sum() == 0:
        return np.empty((0, z_minority.shape[1]))
    neighbors = _minority_neighbors(z_minority, k)
    rng = np.random.default_rng(seed)
    return _generate(z_minority, neighbors, counts, rng)


def minority_label(y: np.ndarray) -> int:
    """The rarer of the two labels; a tie counts the accepted class (1)."""
    ones = int(np.sum(y == 1))
    zeros = int(y.shape[0]) - ones
    return 1 if ones <= zeros else 0


def apply_plan(
    x: np.ndarray, y: np.ndarray, plan: ResamplePlan
) -> tuple[np.ndarray, np.ndarray]:
    """Oversample the minority class of a TRAINING split per the plan.

    Original rows come back first and unchanged; synthetics follow with
    the minority label, in raw feature units.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if plan.method == "none":
        return x.copy(), y.copy()

    label = minority_label(y)
    min_mask = y == label
    n_min = int(min_mask.sum())
    n_maj = int((~min_mask).sum())
    if n_min == 0 or n_maj == 0:
        raise ResampleError("both classes must be present to resample")

    _, scaler = standardize(x)
    z = scaler.transform(x)
    z_min = z[min_mask]
    z_maj = z[~min_mask]

    if plan.method == "smote":
        target = _round_half_up(plan.target_ratio * n_maj)
        synth_z = smote(z_min, plan.k, target - n_min, plan.seed)
    else:
        synth_z = adasyn(z_min, z_maj, plan.k, plan.beta, plan.seed)

    if synth_z.shape[0] == 0:
        return x.copy(), y.copy()
    synth_x = scaler.inverse(synth_z)
    x_out = np.vstack([x, synth_x])
    y_out = np.concatenate([y, np.full(synth_z.shape[0], label, dtype=y.dtype)])
    return x_out, y_out
