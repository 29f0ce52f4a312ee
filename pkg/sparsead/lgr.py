"""
Legendre-Gauss-Radau collocation basis: points, quadrature weights and the
segmented differentiation matrix on the normalized time interval [0, 1]
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

import config
from .coo import CooMatrix
from .errors import (
    ConvergenceFailureError,
    DegreeOutOfRangeError,
    MeshNotIncreasingError,
    MeshSpecError,
)


def _check_degree(d) -> int:
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)):
        raise DegreeOutOfRangeError(f"segment degree must be an integer, got {d!r}")
    if not 1 <= d <= config.MAX_SEGMENT_DEGREE:
        raise DegreeOutOfRangeError(
            f"segment degree {d} outside 1..{config.MAX_SEGMENT_DEGREE}"
        )
    return int(d)


def _legendre_pair(n: int, x: np.ndarray):
    """P_{n-1}, P_n and their derivatives at x by the three-term recurrence."""
    p_prev, p = np.ones_like(x), x.copy()
    dp_prev, dp = np.zeros_like(x), np.ones_like(x)
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        dp_prev, dp = dp, dp_prev + (2 * k + 1) * p_prev
    return p_prev, p, dp_prev, dp


def _radau_residual(d: int, x: np.ndarray):
    p_prev, p, dp_prev, dp = _legendre_pair(d, x)
    return p_prev + p, dp_prev + dp, p_prev


@lru_cache(maxsize=None)
def _basis(d: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Chebyshev-Gauss-Radau starting guess, first root pinned at -1
    x = -np.cos(2.0 * np.pi * np.arange(d) / (2 * d - 1))
    for _ in range(config.NEWTON_MAX_ITERATIONS):
        f, df, _ = _radau_residual(d, x)
        step = np.zeros_like(x)
        step[1:] = f[1:] / df[1:]
        x = x - step
        if np.max(np.abs(step), initial=0.0) <= 4 * np.finfo(float).eps:
            break
    x[0] = -1.0
    x.sort()

    f, _, p_prev = _radau_residual(d, x)
    residual = np.max(np.abs(f))
    if residual > config.ROOT_RESIDUAL_TOL * d * d:
        raise ConvergenceFailureError(
            f"LGR roots of degree {d} stalled at residual {residual:.3e}"
        )

    weights = np.empty(d)
    weights[0] = 2.0 / d ** 2
    weights[1:] = (1.0 - x[1:]) / (d * p_prev[1:]) ** 2
    if abs(weights.sum() - 2.0) > 1e-12 * d:
        raise ConvergenceFailureError(f"LGR weights of degree {d} do not sum to 2")

    support = np.append(x, 1.0)
    diff = support[:, None] - support[None, :]
    np.fill_diagonal(diff, 1.0)
    barycentric = 1.0 / np.prod(diff, axis=1)
    block = (barycentric[None, :] / barycentric[:, None]) / diff
    np.fill_diagonal(block, 0.0)
    np.fill_diagonal(block, -block.sum(axis=1))

    for array in (x, weights, block):
        array.setflags(write=False)
    return x, weights, block[:d]


def lgr_points(d: int) -> np.ndarray:
    """
    Roots of P_{d-1} + P_d on [-1, 1), ascending, first root exactly -1

    Raises:
        DegreeOutOfRangeError: d outside 1..MAX_SEGMENT_DEGREE
        ConvergenceFailureError: Newton polishing missed the residual tolerance
    """
    return _basis(_check_degree(d))[0].copy()


def lgr_weights(d: int) -> np.ndarray:
    """Radau quadrature weights on [-1, 1]; exact for polynomials up to degree 2d-2."""
    return _basis(_check_degree(d))[1].copy()


def differentiation_block(d: int) -> np.ndarray:
    """
    d x (d+1) barycentric differentiation matrix on [-1, 1]

    Column j is the derivative of the j-th Lagrange basis polynomial over the
    support nodes (the d LGR points followed by +1), evaluated at the d
    collocation points.
    """
    return _basis(_check_degree(d))[2].copy()


@dataclass(frozen=True)
class MeshSpec:
    """Segment boundaries 0 = s_0 < ... < s_S = 1 and per-segment degrees"""

    boundaries: Tuple[float, ...]
    degrees: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(float(b) for b in self.boundaries))
        object.__setattr__(self, "degrees", tuple(self.degrees))
        boundaries = self.boundaries
        if len(boundaries) < 2:
            raise MeshSpecError("mesh needs at least the boundaries 0 and 1")
        if boundaries[0] != 0.0 or boundaries[-1] != 1.0:
            raise MeshSpecError(f"mesh boundaries must run from 0 to 1, got {boundaries[0]} to {boundaries[-1]}")
        for a, b in zip(boundaries, boundaries[1:]):
            if not b > a:
                raise MeshNotIncreasingError(f"mesh boundaries not strictly increasing at {a}, {b}")
        if len(self.degrees) != len(boundaries) - 1:
            raise MeshSpecError(
                f"degree count {len(self.degrees)} does not match segment count {len(boundaries) - 1}"
            )
        object.__setattr__(self, "degrees", tuple(_check_degree(d) for d in self.degrees))

    @classmethod
    def uniform(cls, segments: int, degree: int) -> "MeshSpec":
        if segments < 1:
            raise MeshSpecError(f"segment count must be positive, got {segments}")
        return cls(boundaries=tuple(np.linspace(0.0, 1.0, segments + 1)), degrees=(degree,) * segments)

    @classmethod
    def from_degrees(cls, degrees: Sequence[int], boundaries: Optional[Sequence[float]] = None) -> "MeshSpec":
        """Degrees with explicit boundaries, or equal-length segments when boundaries is None."""
        if boundaries is None:
            boundaries = np.linspace(0.0, 1.0, max(len(degrees), 1) + 1)
        return cls(boundaries=tuple(boundaries), degrees=tuple(degrees))

    @property
    def segments(self) -> int:
        return len(self.degrees)

    @property
    def n(self) -> int:
        return sum(self.degrees)


@dataclass(frozen=True)
class Mesh:
    """Assembled collocation mesh: N points M, weights W and the N x (N+1) matrix D"""

    spec: MeshSpec
    M: np.ndarray
    W: np.ndarray
    D: CooMatrix
    csr: sparse.csr_matrix = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.M.size)

    @property
    def support(self) -> np.ndarray:
        """N+1 support nodes: the mesh points followed by the non-collocation node 1."""
        return np.append(self.M, 1.0)


def build_mesh(spec: MeshSpec) -> Mesh:
    """
    Place each segment's scaled LGR basis on the global node range

    Args:
        spec: Validated segment boundaries and degrees

    Returns:
        Mesh with block-banded D; each segment's right support node is the
        next segment's first point (or the final node 1)
    """
    n = spec.n
    M = np.empty(n)
    W = np.empty(n)
    rows, cols, vals = [], [], []
    offset = 0
    for (left, right), d in zip(zip(spec.boundaries, spec.boundaries[1:]), spec.degrees):
        length = right - left
        xi, w, block = _basis(d)
        M[offset:offset + d] = left + length * (xi + 1.0) / 2.0
        W[offset:offset + d] = (length / 2.0) * w
        k, j = np.indices(block.shape)
        rows.append(offset + k.ravel())
        cols.append(offset + j.ravel())
        vals.append((2.0 / length) * block.ravel())
        offset += d
    D = CooMatrix.from_triplets(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n, n + 1)
    )
    return Mesh(spec=spec, M=M, W=W, D=D, csr=D.to_scipy().tocsr())


def time_map(t0: float, tf: float, M: Sequence[float]) -> np.ndarray:
    """Physical time at the mesh points, T = (1 - M) t0 + M tf."""
    M = np.asarray(M, dtype=float)
    return (1.0 - M) * t0 + M * tf
