"""
Coordinate-format containers handed to the NLP interface

Triplets produced by the forward sweep carry duplicates (implicit sums);
these types are where duplicates get merged, once, at export.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import sparse

from .errors import IndexOutOfRangeError, DimensionMismatchError


def _sum_duplicates(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, shape: Tuple[int, int]):
    """Row-major triplets with shared coordinates added up; explicit zeros stay."""
    merged = sparse.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    merged.sum_duplicates()
    merged = merged.tocoo()
    return merged.row.astype(np.int64), merged.col.astype(np.int64), merged.data.astype(float)


@dataclass(frozen=True)
class CooMatrix:
    """Deduplicated COO matrix; entries sorted row-major, explicit zeros kept"""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    shape: Tuple[int, int]

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape: Tuple[int, int]) -> "CooMatrix":
        """
        Merge duplicate (row, col) entries and sort row-major

        Args:
            rows: Row indices, duplicates allowed
            cols: Column indices, same length as rows
            vals: Values, same length as rows
            shape: (m, n) of the matrix

        Returns:
            CooMatrix with unique coordinates
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if not (rows.size == cols.size == vals.size):
            raise DimensionMismatchError(
                f"triplet lengths differ: {rows.size}, {cols.size}, {vals.size}"
            )
        m, n = shape
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise IndexOutOfRangeError(f"triplet index outside shape {shape}")
        rows, cols, vals = _sum_duplicates(rows, cols, vals, (m, n))
        return cls(rows=rows, cols=cols, vals=vals, shape=(m, n))

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    def pattern(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.rows.copy(), self.cols.copy()

    def to_scipy(self) -> sparse.coo_matrix:
        return sparse.coo_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    def toarray(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        dense[self.rows, self.cols] = self.vals
        return dense


@dataclass(frozen=True)
class SparseVector:
    """Deduplicated sparse vector with ascending indices"""

    indices: np.ndarray
    vals: np.ndarray
    size: int

    @classmethod
    def from_pairs(cls, indices, vals, size: int) -> "SparseVector":
        indices = np.asarray(indices, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if indices.size != vals.size:
            raise DimensionMismatchError(
                f"index/value lengths differ: {indices.size}, {vals.size}"
            )
        if indices.size and (indices.min() < 0 or indices.max() >= size):
            raise IndexOutOfRangeError(f"vector index outside size {size}")
        _, indices, vals = _sum_duplicates(np.zeros_like(indices), indices, vals, (1, size))
        return cls(indices=indices, vals=vals, size=size)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def toarray(self) -> np.ndarray:
        dense = np.zeros(self.size)
        dense[self.indices] = self.vals
        return dense
