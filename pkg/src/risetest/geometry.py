"""Observation ingestion and pairwise distance matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

SYMMETRY_RTOL = 1e-9
DIAGONAL_ATOL = 1e-12


@dataclass(frozen=True)
class ObservationSet:
    """Pooled observations, one row per observation.

    Matrix-valued observations are stored as row-major flattenings with
    ``shape_hint = (r, c)``.
    """

    data: np.ndarray
    shape_hint: tuple[int, int] | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise ValidationError(f"observations must be a 2-D array, got ndim={data.ndim}")
        if data.shape[0] < 4:
            raise ValidationError(f"need at least 4 observations, got {data.shape[0]}")
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            i, j = bad[0]
            raise ValidationError(f"non-finite entry at row {i}, column {j}")
        if self.shape_hint is not None:
            r, c = self.shape_hint
            if r * c != data.shape[1]:
                raise ValidationError(
                    f"shape_hint {self.shape_hint} does not match row length {data.shape[1]}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_matrices(cls, mats) -> "ObservationSet":
        """Stack a sequence of equally shaped 2-D arrays (e.g. adjacency matrices)."""
        mats = np.asarray(mats, dtype=np.float64)
        if mats.ndim != 3:
            raise ValidationError("expected a stack of 2-D matrices")
        n, r, c = mats.shape
        return cls(mats.reshape(n, r * c), shape_hint=(r, c))


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, nonnegative, zero-diagonal N x N distance matrix."""

    d: np.ndarray

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def similarity(self) -> np.ndarray:
        return -self.d


def _euclidean(x: np.ndarray) -> np.ndarray:
    # Gram-matrix shortcut loses ~sqrt(eps) accuracy for near-duplicate rows,
    # so take differences explicitly one row block at a time.
    n = x.shape[0]
    out = np.empty((n, n))
    block = max(1, int(2**22 // max(1, n * x.shape[1])))
    for start in range(0, n, block):
        stop = min(n, start + block)
        diff = x[start:stop, None, :] - x[None, :, :]
        out[start:stop] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(out, 0.0)
    # each entry is computed twice; copy the upper triangle so the result is exactly symmetric
    iu = np.triu_indices(n, 1)
    out.T[iu] = out[iu]
    return out


def distance_matrix(obs: ObservationSet, metric: str = "euclidean") -> DistanceMatrix:
    """Pairwise distances between the rows of ``obs``.

    ``metric="frobenius"`` requires ``obs.shape_hint``; the Frobenius norm of a
    matrix difference is the Euclidean norm of the flattened difference, so
    both metrics return the same numbers.
    """
    if not isinstance(obs, ObservationSet):
        obs = ObservationSet(obs)
    if metric == "frobenius":
        if obs.shape_hint is None:
            raise ValidationError("frobenius metric needs matrix observations (shape_hint)")
    elif metric != "euclidean":
        raise ValidationError(f"unknown metric {metric!r}")
    d = _euclidean(obs.data)
    d.setflags(write=False)
    return DistanceMatrix(d)


def validate_distance_matrix(raw) -> DistanceMatrix:
    """Check a precomputed distance matrix and return it exactly symmetrized."""
    d = np.array(raw, dtype=np.float64, copy=True)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError(f"distance matrix must be square, got shape {d.shape}")
    bad = np.argwhere(~np.isfinite(d))
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"non-finite entry at ({i},{j})")
    neg = np.argwhere(d < 0)
    if neg.size:
        i, j = neg[0]
        raise ValidationError(f"negative entry {d[i, j]} at ({i},{j})")
    diag = np.abs(np.diag(d))
    if diag.size and diag.max() > DIAGONAL_ATOL:
        i = int(np.argmax(diag))
        raise ValidationError(f"nonzero diagonal {d[i, i]} at ({i},{i})")
    gap = np.abs(d - d.T)
    scale = np.maximum(np.abs(d), np.abs(d.T))
    asym = np.argwhere(gap > SYMMETRY_RTOL * scale)
    if asym.size:
        i, j = sorted(asym[0])
        raise ValidationError(f"asymmetric at ({i},{j})/({j},{i}): {d[i, j]} vs {d[j, i]}")
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    d.setflags(write=False)
    return DistanceMatrix(d)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_csv_matrix(path) -> np.ndarray:
    """Read a numeric CSV; a non-numeric first row is treated as a header."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    if not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ValidationError(f"{path}: header only, no data")
    width = len(rows[0])
    for lineno, row in enumerate(rows):
        if len(row) != width:
            raise ValidationError(f"{path}: row {lineno} has {len(row)} fields, expected {width}")
    try:
        out = np.array([[float(c) for c in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    bad = np.argwhere(~np.isfinite(out))
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"{path}: non-finite entry at row {i}, column {j}")
    return out


def read_observations(path) -> np.ndarray:
    return read_csv_matrix(path)


def read_distance_csv(path) -> DistanceMatrix:
    return validate_distance_matrix(read_csv_matrix(path))
